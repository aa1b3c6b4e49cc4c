//! Scalar abstractions shared by the numeric modules.
//!
//! Spectral and propagation code is written against [`Real`] so that it runs
//! in `f32` or `f64`. Scheme decoding and capacity planning only need field
//! arithmetic and ordering, so they accept any [`Exact`] scalar, which
//! includes `num_rational::Ratio<i64>` for bit-exact window arithmetic.

use std::fmt::Debug;

use num_traits::{Float, FloatConst, FromPrimitive, Num, ToPrimitive};
use rustfft::FftNum;

/// Floating point scalar usable by the FFT-backed modules.
pub trait Real: Float + FloatConst + FftNum + FromPrimitive + ToPrimitive + Debug {
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("index fits in a float")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl<T> Real for T where T: Float + FloatConst + FftNum + FromPrimitive + ToPrimitive + Debug {}

/// Ordered field scalar: floats or exact rationals.
pub trait Exact: Num + Copy + PartialOrd + FromPrimitive + ToPrimitive + Debug {
    #[inline]
    fn half() -> Self {
        Self::one() / (Self::one() + Self::one())
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("count fits in scalar")
    }

    #[inline]
    fn approx(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Exact for T where T: Num + Copy + PartialOrd + FromPrimitive + ToPrimitive + Debug {}
