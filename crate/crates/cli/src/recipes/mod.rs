//! One function per subcommand, plus the reusable pieces the acceptance
//! suite calls directly.

pub mod basic;
pub mod diag;
pub mod geometry;
pub mod tables;
