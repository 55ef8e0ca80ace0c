//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;

/// Real floating point type underlying the complex lattice values: `f32` or `f64`.
///
/// `FftNum` pulls in `num_traits::Signed`, whose `abs`/`signum` collide with
/// the `Float` methods of the same name. Call those through `Float::abs`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + FftNum
    + Sum
    + Default
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal (tolerances, seeds drawn as `f64`).
    fn lit(x: f64) -> Self;

    /// Lossless widening for reports and file output.
    fn to_f64_lossy(self) -> f64;

    /// Smallest positive denominator used to guard relative measures.
    fn tiny() -> Self {
        Self::lit(1e-300).max(Self::min_positive_value())
    }
}

impl Real for f32 {
    #[inline]
    fn lit(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline]
    fn lit(x: f64) -> Self {
        x
    }
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self
    }
}

/// Real-valued absolute value without the `Float`/`Signed` ambiguity.
#[inline]
pub(crate) fn abs<T: Real>(x: T) -> T {
    Float::abs(x)
}

#[inline]
pub(crate) fn is_finite_c<T: Real>(z: &num_complex::Complex<T>) -> bool {
    z.re.is_finite() && z.im.is_finite()
}
