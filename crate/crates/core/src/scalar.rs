//! Floating-point scalar abstraction shared by the analytic parts of the crate.
//!
//! The device laws, the working-point solver, and the calibration estimators
//! are written once against [`Scalar`] and monomorphised for `f32` and `f64`.
//! The event engine itself runs on integer femtoseconds and `f64` parameters.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar type usable by the detector model and estimators.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar representable as f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Conversion factor between a Gaussian FWHM and its standard deviation, `2·sqrt(2·ln 2)`.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

#[inline]
pub fn fwhm_to_sigma<T: Scalar>(fwhm: T) -> T {
    fwhm / T::lit(FWHM_PER_SIGMA)
}

#[inline]
pub fn sigma_to_fwhm<T: Scalar>(sigma: T) -> T {
    sigma * T::lit(FWHM_PER_SIGMA)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fwhm_constant_matches_closed_form() {
        let exact = 2.0 * (2.0 * std::f64::consts::LN_2).sqrt();
        assert!((FWHM_PER_SIGMA - exact).abs() < 1e-15);
        assert!((sigma_to_fwhm(fwhm_to_sigma(360.0_f64)) - 360.0).abs() < 1e-12);
        assert!((fwhm_to_sigma(2.354_820_f32) - 1.0).abs() < 1e-6);
    }
}
