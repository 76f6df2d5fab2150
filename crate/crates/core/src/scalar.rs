//! Scalar abstraction for the geometric parts of the crate.
//!
//! Distortion evaluation and lattice quantization only need field arithmetic,
//! square roots and the log-gamma function, so they are written once over
//! [`Real`] and instantiated for `f32` and `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar usable by the generic lattice and distortion code.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Natural logarithm of the gamma function.
    fn ln_gamma(self) -> Self;

    /// Lossless-enough conversion from `f64` constants.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable in scalar type")
    }

    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("integer representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Real for f64 {
    #[inline]
    fn ln_gamma(self) -> f64 {
        statrs::function::gamma::ln_gamma(self)
    }
}

impl Real for f32 {
    #[inline]
    fn ln_gamma(self) -> f32 {
        statrs::function::gamma::ln_gamma(self as f64) as f32
    }
}
