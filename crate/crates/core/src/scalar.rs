//! Scalar abstraction shared by every numeric module.
//!
//! All of the math in this crate is written against [`Real`], which is
//! implemented for `f32` and `f64`. The root of the crate re-exports `f64`
//! aliases for the common case.

use std::fmt::{Debug, Display, LowerExp};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating point scalar: `f32` or `f64`.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Display + LowerExp + Debug + Send + Sync + 'static
{
    /// Converts an `f64` literal. Always succeeds for the built-in floats.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal must be representable")
    }

    #[inline]
    fn from_usize_lossy(x: usize) -> Self {
        Self::from_usize(x).expect("usize must be representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Machine epsilon of the underlying type.
    fn eps() -> Self;

    fn infinity() -> Self;

    fn is_finite_value(self) -> bool;
}

impl Real for f64 {
    fn eps() -> Self {
        f64::EPSILON
    }
    fn infinity() -> Self {
        f64::INFINITY
    }
    fn is_finite_value(self) -> bool {
        self.is_finite()
    }
}

impl Real for f32 {
    fn eps() -> Self {
        f32::EPSILON
    }
    fn infinity() -> Self {
        f32::INFINITY
    }
    fn is_finite_value(self) -> bool {
        self.is_finite()
    }
}
