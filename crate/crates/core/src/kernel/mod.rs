//! The Euclidean heat kernel and exact heat flow for single balls and
//! pairs of balls.

mod pair;
mod table;

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{distance, unit_ball_volume};
use crate::numerics::{gamma_q, noncentral_chisq, QuadratureSpec, ValueWithError};

pub use pair::{
    covariogram_integral, gaussian_pair_integral, geometric_breaks_below, heat_kernel_sphere_average,
    sphere_exp_average,
};
pub use table::{unit_ball_table, unit_content_direct, unit_loss_direct, unit_value, UnitBallTable, UnitQuantity};

/// A strictly positive time.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Time(f64);

impl Time {
    pub fn new(t: f64) -> Result<Self> {
        if t > 0.0 && t.is_finite() {
            Ok(Self(t))
        } else {
            Err(Error::invalid(format!("time must be positive and finite, got {t}")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Time {
    type Error = Error;
    fn try_from(t: f64) -> Result<Self> {
        Time::new(t)
    }
}

impl From<Time> for f64 {
    fn from(t: Time) -> f64 {
        t.0
    }
}

/// Two-sided Gaussian envelope `C_1 e^{-d²/(2 D_1 t)} / V ≤ p ≤ C_2 e^{-d²/(2 D_2 t)} / V`
/// with `V = ω_m t^{m/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiYauConstants {
    pub c1: f64,
    pub c2: f64,
    pub d1: f64,
    pub d2: f64,
}

impl LiYauConstants {
    pub fn new(c1: f64, c2: f64, d1: f64, d2: f64) -> Result<Self> {
        if !(c1 > 0.0 && c2 > 0.0 && c1 <= c2) {
            return Err(Error::invalid(format!("need 0 < C1 <= C2, got C1={c1}, C2={c2}")));
        }
        if !(d1 > 0.0 && d1 < 2.0) {
            return Err(Error::invalid(format!("D1 must lie in (0, 2), got {d1}")));
        }
        if !(d2 > 2.0 && d2.is_finite()) {
            return Err(Error::invalid(format!("D2 must exceed 2, got {d2}")));
        }
        Ok(Self { c1, c2, d1, d2 })
    }

    /// Sharp constants for `ℝ^m`: `C_1 = C_2 = ω_m (4π)^{-m/2}`.
    pub fn euclidean(m: usize, d1: f64, d2: f64) -> Result<Self> {
        let c = unit_ball_volume(m) * (4.0 * PI).powf(-0.5 * m as f64);
        Self::new(c, c, d1, d2)
    }
}

/// `(4πt)^{-m/2} e^{-|x-y|²/(4t)}`.
pub fn heat_kernel(m: usize, x: &[f64], y: &[f64], t: Time) -> f64 {
    debug_assert!(x.len() == m && y.len() == m);
    let t = t.get();
    let d = distance(x, y);
    (4.0 * PI * t).powf(-0.5 * m as f64) * (-d * d / (4.0 * t)).exp()
}

/// Temperature at `x` from unit initial data on `B(c;r)`: the Gaussian
/// measure of the ball, a noncentral chi-square probability.
pub fn ball_temperature(m: usize, c: &[f64], r: f64, x: &[f64], t: Time) -> f64 {
    let t = t.get();
    let d = distance(x, c);
    let k = m as f64;
    // Rigorous early exits: Brownian displacement beyond |d - r| decides.
    let gap = (d - r).abs();
    let tail = gamma_q(0.5 * k, gap * gap / (4.0 * t));
    if tail < 1e-300 {
        return if d > r { 0.0 } else { 1.0 };
    }
    noncentral_chisq(k, d * d / (2.0 * t), r * r / (2.0 * t)).cdf.clamp(0.0, 1.0)
}

fn check_radius(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("radius must be positive, got {r}")))
    }
}

fn direct_spec() -> QuadratureSpec {
    QuadratureSpec {
        rel_tol: 1e-12,
        abs_tol: 0.0,
        max_subdivisions: 4000,
    }
}

/// `H_{B(0;r)}(t) = r^m H_1(t/r²)`, by direct quadrature.
pub fn ball_heat_content(m: usize, r: f64, t: Time) -> Result<ValueWithError> {
    check_radius(r)?;
    let scale = r.powi(m as i32);
    Ok(unit_content_direct(m, t.get() / (r * r), &direct_spec())?.scale(scale))
}

/// `F_{B(0;r)}(t) = ω_m r^m - H_{B(0;r)}(t)`, integrated from the volume
/// deficit so that small losses keep full relative accuracy.
pub fn ball_heat_loss(m: usize, r: f64, t: Time) -> Result<ValueWithError> {
    check_radius(r)?;
    let scale = r.powi(m as i32);
    Ok(unit_loss_direct(m, t.get() / (r * r), &direct_spec())?.scale(scale))
}

/// Heat flowing from `B(0;r1)` into `B(d e_1;r2)` by time `t`, for
/// disjoint or touching balls.
pub fn cross_heat_content(m: usize, r1: f64, r2: f64, d: f64, t: Time) -> Result<ValueWithError> {
    check_radius(r1)?;
    check_radius(r2)?;
    if !(d >= r1 + r2) {
        return Err(Error::invalid(format!(
            "cross heat content needs disjoint balls, got d={d} < r1 + r2 = {}",
            r1 + r2
        )));
    }
    gaussian_pair_integral(m, r1, r2, d, t.get(), &direct_spec())
}

/// Rigorous upper bound `|B_1||B_2| (4πt)^{-m/2} e^{-gap²/(4t)}` on the
/// cross heat content of balls separated by `gap`.
pub fn cross_heat_upper_bound(m: usize, r1: f64, r2: f64, gap: f64, t: f64) -> f64 {
    let omega = unit_ball_volume(m);
    let mi = m as i32;
    omega * omega * r1.powi(mi) * r2.powi(mi) * (4.0 * PI * t).powf(-0.5 * m as f64) * (-gap * gap / (4.0 * t)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiYauReport {
    pub pass: bool,
    /// Smallest relative margin `min(p/lower, upper/p) - 1` over all samples.
    pub worst_margin: f64,
    pub violations: usize,
    pub samples: usize,
}

/// Relative slack allowed before a sample counts as a violation.
pub const LI_YAU_SLACK: f64 = 1e-14;

/// Checks the envelope on seeded random `(x, y, t)`: `t` log-uniform in
/// `[1e-4, 1e2]`, `x` uniform in `[-1,1]^m`, and `|x - y|²/(4t)` spread
/// over `[0, 50]`.
pub fn li_yau_envelope_check(m: usize, lyc: &LiYauConstants, n_samples: usize, seed: u64) -> Result<LiYauReport> {
    LiYauConstants::new(lyc.c1, lyc.c2, lyc.d1, lyc.d2)?;
    if m == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = unit_ball_volume(m);
    let mut worst = f64::INFINITY;
    let mut violations = 0;
    for _ in 0..n_samples {
        let t = 10f64.powf(rng.random_range(-4.0..2.0));
        let x: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut dir: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        let s: f64 = rng.random_range(0.0..50.0);
        let len = (4.0 * t * s).sqrt();
        for v in dir.iter_mut() {
            *v *= len / norm;
        }
        let y: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + b).collect();
        let d2 = distance(&x, &y).powi(2);
        let vol = omega * t.powf(0.5 * m as f64);
        let p = heat_kernel(m, &x, &y, Time(t));
        let lower = lyc.c1 * (-d2 / (2.0 * lyc.d1 * t)).exp() / vol;
        let upper = lyc.c2 * (-d2 / (2.0 * lyc.d2 * t)).exp() / vol;
        let margin = (p / lower).min(upper / p) - 1.0;
        if margin < -LI_YAU_SLACK {
            violations += 1;
        }
        worst = worst.min(margin);
    }
    Ok(LiYauReport {
        pass: violations == 0,
        worst_margin: worst,
        violations,
        samples: n_samples,
    })
}
