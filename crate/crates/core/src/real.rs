//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::Serialize;

/// Floating-point scalar the models are written against: `f32` or `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + 'static
{
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Standard normal cumulative distribution function.
pub fn norm_cdf<T: Real>(x: T) -> T {
    let x = x.f64();
    T::lit(0.5 * libm::erfc(-x / std::f64::consts::SQRT_2))
}

/// Standard normal density.
pub fn norm_pdf<T: Real>(x: T) -> T {
    let x = x.f64();
    T::lit((-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt())
}

pub fn gamma<T: Real>(x: T) -> T {
    T::lit(libm::tgamma(x.f64()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_reference_values() {
        assert!((norm_cdf(0.0_f64) - 0.5).abs() < 1e-16);
        assert!((norm_cdf(1.959963984540054_f64) - 0.975).abs() < 1e-15);
        // far tail keeps relative accuracy
        let tail = norm_cdf(-10.0_f64);
        assert!((tail / 7.619853024160527e-24 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_half() {
        assert!((gamma(0.5_f64) - std::f64::consts::PI.sqrt()).abs() < 1e-14);
        assert!((gamma(0.5_f32) - 1.772_453_9).abs() < 1e-6);
    }
}
