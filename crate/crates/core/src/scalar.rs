//! Scalar abstraction shared by every geometric routine in the crate.
//!
//! All numerics are written against [`Scalar`], which is implemented for
//! `f64` (the default used by the CLI and the experiments) and `f32`.
//! Tolerances are part of the trait because a single absolute threshold
//! cannot serve both precisions.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use ndarray::ScalarOperand;
use num_traits::{Float, FromPrimitive, ToPrimitive};

pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + ScalarOperand
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Absolute distance below which a pre-activation counts as sitting on a breakpoint.
    fn breakpoint_tol() -> Self;

    /// Signed-distance snap used when splitting polygons by a line.
    fn snap_tol() -> Self;

    /// Tolerance for the boundary band of window-cut tests.
    fn boundary_tol() -> Self;

    /// Converts an `f64` literal. Panics only for values the type cannot hold at all.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    fn breakpoint_tol() -> Self {
        1e-12
    }
    fn snap_tol() -> Self {
        1e-10
    }
    fn boundary_tol() -> Self {
        1e-12
    }
}

impl Scalar for f32 {
    fn breakpoint_tol() -> Self {
        1e-6
    }
    fn snap_tol() -> Self {
        1e-5
    }
    fn boundary_tol() -> Self {
        1e-6
    }
}
