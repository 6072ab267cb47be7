//! Geometry of batch normalization in continuous piecewise-affine (CPA)
//! networks.
//!
//! The crate covers network evaluation and activation patterns ([`cpa`]),
//! batch statistics and frozen-batch reparameterization ([`batchnorm`]),
//! switching hyperplanes and window-cut tests ([`hyperplane`]), closed-form
//! arrangement counts ([`arrangement`]), exact region enumeration in 2D
//! windows and slices ([`enumerate`], [`pullback`], [`decision`]), offset
//! diagnostics ([`diagnostics`]) and file formats ([`io`], [`svg`]).
//!
//! Everything numeric is generic over [`Scalar`] (`f64` or `f32`); the
//! aliases below fix the `f64` instantiation used by the tools.

// `!(x > y)` guards are intentional: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arrangement;
pub mod batchnorm;
pub mod cpa;
pub mod decision;
pub mod diagnostics;
pub mod enumerate;
pub mod error;
pub mod hyperplane;
pub mod io;
pub mod polygon;
pub mod pullback;
pub mod scalar;
pub mod svg;

pub use batchnorm::{BatchNormSlot, BatchStats, FrozenBatch};
pub use cpa::{ActivationPattern, AffineMap, CpaActivation, HiddenBlock, LinearLayer, Mode, Network};
pub use enumerate::{Enumeration, RegionCell, SliceMap};
pub use error::{Error, Result};
pub use hyperplane::{Boundary, Hyperplane, OffsetRecord, OffsetVariant, Window};
pub use polygon::ConvexPolygon;
pub use scalar::Scalar;

pub type Net = Network<f64>;
pub type Activation = CpaActivation<f64>;
pub type Frozen = FrozenBatch<f64>;
pub type Cell = RegionCell<f64>;
pub type Slice = SliceMap<f64>;
pub type Box2 = Window<f64>;

/// Lowercase hex of the first `n` bytes of `bytes`.
pub(crate) fn hex_prefix(bytes: &[u8], n: usize) -> String {
    use std::fmt::Write;
    bytes.iter().take(n).fold(String::with_capacity(2 * n), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Full lowercase hex of a sha256 digest of `data`.
pub fn sha256_hex(data: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let d = Sha256::digest(data);
    hex_prefix(&d, d.len())
}
