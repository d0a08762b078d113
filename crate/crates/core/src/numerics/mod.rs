//! Shared numerical primitives: adaptive quadrature, special functions,
//! the noncentral chi-square distribution and compensated summation.

mod interp;
mod ncx2;
mod quad;
mod special;
mod sum;

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

pub use interp::LogLogTable;
pub use ncx2::{noncentral_chisq, noncentral_chisq_cdf, noncentral_chisq_sf, ChiSquareSplit};
pub use quad::{integrate, integrate_semi_infinite, Endpoint, QuadratureSpec};
pub use special::{
    beta_reg, erf, erfc, gamma_fn, gamma_p, gamma_q, ln_gamma, unit_sphere_cap_fraction,
};
pub use sum::{neumaier_sum, NeumaierSum};

/// A numerical estimate paired with a non-negative error bound.
///
/// Bounds add under addition and subtraction of independent estimates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ValueWithError {
    pub value: f64,
    pub error_bound: f64,
}

impl ValueWithError {
    pub const ZERO: Self = Self {
        value: 0.0,
        error_bound: 0.0,
    };

    pub fn new(value: f64, error_bound: f64) -> Self {
        debug_assert!(error_bound >= 0.0, "negative error bound {error_bound}");
        Self {
            value,
            error_bound: error_bound.abs(),
        }
    }

    pub fn exact(value: f64) -> Self {
        Self::new(value, 0.0)
    }

    /// Midpoint and half-width of the interval `[lo, hi]`.
    pub fn from_interval(lo: f64, hi: f64) -> Self {
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        Self::new(0.5 * (lo + hi), 0.5 * (hi - lo))
    }

    pub fn lower(&self) -> f64 {
        self.value - self.error_bound
    }

    pub fn upper(&self) -> f64 {
        self.value + self.error_bound
    }

    pub fn with_extra_error(self, extra: f64) -> Self {
        Self::new(self.value, self.error_bound + extra.abs())
    }

    pub fn scale(self, k: f64) -> Self {
        Self::new(self.value * k, self.error_bound * k.abs())
    }

    /// True when `other` lies within the combined error bounds of `self`
    /// and `other`, plus an additional `slack`.
    pub fn agrees_with(&self, other: &ValueWithError, slack: f64) -> bool {
        (self.value - other.value).abs() <= self.error_bound + other.error_bound + slack
    }
}

impl fmt::Display for ValueWithError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.12e} ± {:.3e}", self.value, self.error_bound)
    }
}

impl Add for ValueWithError {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.value + rhs.value, self.error_bound + rhs.error_bound)
    }
}

impl Sub for ValueWithError {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.value - rhs.value, self.error_bound + rhs.error_bound)
    }
}

impl Neg for ValueWithError {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.value, self.error_bound)
    }
}

impl Mul<f64> for ValueWithError {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        self.scale(rhs)
    }
}

impl std::iter::Sum for ValueWithError {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        let mut v = NeumaierSum::new();
        let mut e = NeumaierSum::new();
        for x in iter {
            v.add(x.value);
            e.add(x.error_bound);
        }
        Self::new(v.total(), e.total())
    }
}
