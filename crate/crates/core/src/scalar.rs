//! Scalar abstraction for coordinates.
//!
//! All geometry, grid and raster code is written against [`Scalar`], which is
//! implemented for `f32` and `f64`. Aggregates are always accumulated in `f64`
//! regardless of the coordinate type.

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use std::fmt::{Debug, Display};

/// Floating point coordinate type.
pub trait Scalar:
    'static
    + Copy
    + Send
    + Sync
    + Default
    + Float
    + FloatConst
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
{
    /// Lossy conversion from an `f64` literal.
    fn lit(v: f64) -> Self;

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `2^e` for a non-negative exponent. Exact for the exponent range used by
    /// the grid (`e <= 31`).
    #[inline]
    fn pow2(e: u32) -> Self {
        Self::lit((1u64 << e) as f64)
    }
}

impl Scalar for f32 {
    #[inline]
    fn lit(v: f64) -> Self {
        v as f32
    }
}

impl Scalar for f64 {
    #[inline]
    fn lit(v: f64) -> Self {
        v
    }
}
