//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;

/// Floating point scalar usable by the field, spectral and trajectory code: `f32` or `f64`.
///
/// `FftNum` pulls in `num_traits::Signed`, which also defines `abs` and `signum`; call those
/// through `Float::abs` in generic code to avoid ambiguity.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + FftNum
    + Default
    + Display
    + LowerExp
    + Debug
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    /// Converts a count or index into this scalar type.
    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Machine-precision scaled tolerance: `max(tol, factor * EPSILON)`.
    #[inline]
    fn tol(tol: f64, factor: f64) -> Self {
        let eps = <Self as Float>::epsilon().as_f64();
        Self::lit(tol.max(factor * eps))
    }
}

impl Real for f32 {}
impl Real for f64 {}
