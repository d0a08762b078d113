//! Small-time laws for the lattice and chain families: the Riesz-type
//! integrals behind their coefficients, which law applies for given
//! `(m, α)`, and log-log power-law fits of computed data.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{deficit_volume, overlap_volume, unit_ball_volume, unit_sphere_area, Family, RadiusProfile};
use crate::numerics::{gamma_fn, integrate, neumaier_sum, Endpoint, QuadratureSpec, ValueWithError};

fn riesz_spec() -> QuadratureSpec {
    QuadratureSpec {
        rel_tol: 1e-12,
        abs_tol: 0.0,
        max_subdivisions: 4000,
    }
}

/// `∫_{B_1}∫_{B_1} |x-y|^{-s} dy dx` over the unit ball, `0 ≤ s < m`.
pub fn riesz_in(m: usize, s: f64) -> Result<ValueWithError> {
    let mf = m as f64;
    if m == 0 || !(s >= 0.0 && s < mf) {
        return Err(Error::invalid(format!("riesz_in needs 0 <= s < m = {m}, got {s}")));
    }
    let area = unit_sphere_area(m);
    let f = |r: f64| area * r.powf(mf - 1.0 - s) * overlap_volume(m, 1.0, 1.0, r);
    let v = integrate(
        f,
        0.0,
        2.0,
        Endpoint::Power(mf - 1.0 - s),
        Endpoint::Power(0.5 * (mf + 1.0)),
        &riesz_spec(),
    )?;
    Ok(v.with_extra_error(1e-14 * v.value))
}

/// Guard keeping `riesz_out` away from the divergence at `s = m`.
pub const RIESZ_OUT_GUARD: f64 = 1e-6;

/// `∫_{B_1}∫_{ℝ^m \ B_1} |x-y|^{-s} dy dx`, `m < s < m + 1`.
pub fn riesz_out(m: usize, s: f64) -> Result<ValueWithError> {
    let mf = m as f64;
    if m == 0 || !(s >= mf + RIESZ_OUT_GUARD && s < mf + 1.0) {
        return Err(Error::invalid(format!(
            "riesz_out needs m + {RIESZ_OUT_GUARD:e} <= s < m + 1 for m = {m}, got {s}"
        )));
    }
    let area = unit_sphere_area(m);
    let omega = unit_ball_volume(m);
    // The deficit vanishes linearly at 0; beyond 2 it is the whole ball.
    let f = |r: f64| area * r.powf(mf - 1.0 - s) * deficit_volume(m, 1.0, 1.0, r);
    let near = integrate(f, 0.0, 2.0, Endpoint::Power(mf - s), Endpoint::Regular, &riesz_spec())?;
    let far = area * omega * 2f64.powf(mf - s) / (s - mf);
    let v = near + ValueWithError::new(far, 4.0 * f64::EPSILON * far);
    Ok(v.with_extra_error(1e-14 * v.value))
}

/// `2^{m-1-1/α} π^{-m/2} α^{-1} Γ((2mα-1)/(2α)) a^{1/α}`.
fn coeff_prefactor(m: usize, alpha: f64, a: f64) -> f64 {
    let mf = m as f64;
    2f64.powf(mf - 1.0 - 1.0 / alpha) * PI.powf(-0.5 * mf) / alpha
        * gamma_fn((2.0 * mf * alpha - 1.0) / (2.0 * alpha))
        * a.powf(1.0 / alpha)
}

fn riesz_exponent(m: usize, alpha: f64) -> f64 {
    (2.0 * m as f64 * alpha - 1.0) / alpha
}

fn check_a(a: f64) -> Result<()> {
    if a > 0.0 && a <= 0.5 {
        Ok(())
    } else {
        Err(Error::invalid(format!("radius scale a must lie in (0, 1/2], got {a}")))
    }
}

/// Leading coefficient of the lattice heat content when `1/(2m) < α < 1/m`.
pub fn c_coeff(m: usize, alpha: f64, a: f64) -> Result<ValueWithError> {
    let mf = m as f64;
    if m == 0 || !(alpha > 1.0 / (2.0 * mf) && alpha < 1.0 / mf) {
        return Err(Error::invalid(format!("c coefficient needs 1/(2m) < alpha < 1/m, got alpha={alpha}, m={m}")));
    }
    check_a(a)?;
    Ok(riesz_in(m, riesz_exponent(m, alpha))?.scale(coeff_prefactor(m, alpha, a)))
}

/// Leading coefficient of the lattice heat loss when `1/m < α < 1/(m-1)`.
pub fn d_coeff(m: usize, alpha: f64, a: f64) -> Result<ValueWithError> {
    let mf = m as f64;
    let upper = if m == 1 { f64::INFINITY } else { 1.0 / (mf - 1.0) };
    if m == 0 || !(alpha > 1.0 / mf && alpha < upper) {
        return Err(Error::invalid(format!("d coefficient needs 1/m < alpha < 1/(m-1), got alpha={alpha}, m={m}")));
    }
    check_a(a)?;
    Ok(riesz_out(m, riesz_exponent(m, alpha))?.scale(coeff_prefactor(m, alpha, a)))
}

/// Perimeter of the infinite lattice union, `m ω_m a^{m-1} ζ((m-1)α)`,
/// enclosed by a head sum and integral tail bounds.
pub fn lattice_perimeter(m: usize, profile: RadiusProfile, n_head: usize) -> Result<ValueWithError> {
    let p = (m as f64 - 1.0) * profile.alpha;
    if !(p > 1.0) {
        return Err(Error::invalid("lattice perimeter is infinite for (m-1) alpha <= 1"));
    }
    let scale = unit_sphere_area(m) * profile.a.powi(m as i32 - 1);
    let head = neumaier_sum((1..=n_head).rev().map(|i| (i as f64).powf(-p)));
    let nf = n_head as f64;
    let lo = head + (nf + 1.0).powf(1.0 - p) / (p - 1.0);
    let hi = head + nf.powf(1.0 - p) / (p - 1.0);
    Ok(ValueWithError::from_interval(scale * lo, scale * hi).with_extra_error(1e-15 * scale * hi))
}

const PERIMETER_HEAD: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quantity {
    H,
    F,
}

/// Order of the remainder after the leading term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Remainder {
    /// `O(1)`.
    Bounded,
    /// `O(t^{1/2})`.
    SqrtT,
    /// `O(t^p)` with `p = (mα-1)/(2α)`.
    Power { p: f64 },
    /// `O(t log(1/t))`.
    TLogT,
    /// `O(t)`.
    T,
    /// Only `≍` is known.
    TwoSidedOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    LatticeContent,
    LatticeLoss,
    Perimeter,
    ChainContent,
    /// Boundary values of `α`, divergent cases and custom unions.
    NotCovered,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeLaw {
    pub regime: Regime,
    pub quantity: Quantity,
    pub exponent: f64,
    pub coefficient: Option<f64>,
    pub remainder: Remainder,
}

impl RegimeLaw {
    fn not_covered(m: usize, alpha: f64) -> Self {
        Self {
            regime: Regime::NotCovered,
            quantity: Quantity::H,
            exponent: (m as f64 * alpha - 1.0) / (2.0 * alpha),
            coefficient: None,
            remainder: Remainder::TwoSidedOnly,
        }
    }

    /// Ratio of remainder to leading term at `t`, taking both constants as 1.
    pub fn contamination(&self, t: f64) -> Option<f64> {
        let lead = t.powf(self.exponent);
        let rem = match self.remainder {
            Remainder::Bounded => 1.0,
            Remainder::SqrtT => t.sqrt(),
            Remainder::Power { p } => t.powf(p),
            Remainder::TLogT => t * (1.0 / t).ln(),
            Remainder::T => t,
            Remainder::TwoSidedOnly => return None,
        };
        Some(rem / lead)
    }

    /// One decade of `t` whose top is where [`Self::contamination`] drops
    /// to [`FIT_CONTAMINATION`]; laws without a remainder use `[1e-4, 1e-3]`.
    pub fn default_fit_window(&self) -> (f64, f64) {
        if self.contamination(0.5).is_none() {
            return (1e-4, 1e-3);
        }
        let excess = |lt: f64| self.contamination(lt.exp()).unwrap_or(f64::INFINITY).ln() - FIT_CONTAMINATION.ln();
        // Contamination grows with t on (0, 1/e]; bisect in log t.
        let (mut lo, mut hi) = (-700.0f64, -1.0f64);
        if excess(hi) <= 0.0 {
            return (10f64.powf(-2.0), 10f64.powf(-1.0));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if excess(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let top = lo.exp();
        (top / 10.0, top)
    }
}

/// Remainder-to-leading ratio (unit constants) tolerated at the top of a
/// default fit window. Remainder constants of order one push the fitted
/// exponent off by roughly this ratio times the leading exponent's size, so
/// `0.1` is too loose for a `±0.03` exponent check on the lattice laws.
pub const FIT_CONTAMINATION: f64 = 0.03;

fn near(x: f64, y: f64) -> bool {
    (x - y).abs() <= 1e-12 * y.abs()
}

/// The small-time law that applies to the lattice or chain union with
/// radii `a i^{-α}` in `ℝ^m`.
pub fn classify_regime(m: usize, profile: RadiusProfile, family: Family) -> Result<RegimeLaw> {
    if m == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    let (a, alpha) = (profile.a, profile.alpha);
    let mf = m as f64;
    let lead = (mf * alpha - 1.0) / (2.0 * alpha);
    let inv = |k: f64| if k > 0.0 { 1.0 / k } else { f64::INFINITY };
    let (b_content, b_loss, b_perim, b_log) = (inv(2.0 * mf), inv(mf), inv(mf - 1.0), inv(mf - 2.0));
    let at_boundary = |x: f64| x.is_finite() && near(alpha, x);
    match family {
        Family::Custom => Ok(RegimeLaw::not_covered(m, alpha)),
        Family::Chain => {
            let lo = inv(2.0 * mf - 1.0);
            if alpha > lo && alpha < b_loss && !at_boundary(lo) && !at_boundary(b_loss) {
                Ok(RegimeLaw {
                    regime: Regime::ChainContent,
                    quantity: Quantity::H,
                    exponent: lead,
                    coefficient: None,
                    remainder: Remainder::TwoSidedOnly,
                })
            } else {
                Ok(RegimeLaw::not_covered(m, alpha))
            }
        }
        Family::Lattice => {
            if [b_content, b_loss, b_perim].into_iter().any(at_boundary) {
                return Ok(RegimeLaw::not_covered(m, alpha));
            }
            if alpha > b_content && alpha < b_loss {
                return Ok(RegimeLaw {
                    regime: Regime::LatticeContent,
                    quantity: Quantity::H,
                    exponent: lead,
                    coefficient: Some(c_coeff(m, alpha, a)?.value),
                    remainder: Remainder::Bounded,
                });
            }
            if alpha > b_loss && alpha < b_perim {
                return Ok(RegimeLaw {
                    regime: Regime::LatticeLoss,
                    quantity: Quantity::F,
                    exponent: lead,
                    coefficient: Some(d_coeff(m, alpha, a)?.value),
                    remainder: Remainder::SqrtT,
                });
            }
            if alpha > b_perim {
                let remainder = if m == 2 || (alpha < b_log && !at_boundary(b_log)) {
                    Remainder::Power { p: lead }
                } else if at_boundary(b_log) {
                    Remainder::TLogT
                } else {
                    Remainder::T
                };
                let perim = lattice_perimeter(m, profile, PERIMETER_HEAD)?;
                return Ok(RegimeLaw {
                    regime: Regime::Perimeter,
                    quantity: Quantity::F,
                    exponent: 0.5,
                    coefficient: Some(perim.value / PI.sqrt()),
                    remainder,
                });
            }
            Ok(RegimeLaw::not_covered(m, alpha))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub exponent: f64,
    pub log_coefficient: f64,
    pub coefficient: f64,
    pub r_squared: f64,
    pub t_window: (f64, f64),
}

/// Least-squares line through `(ln t, ln value)`.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<FitResult> {
    if points.len() < 4 {
        return Err(Error::invalid(format!("power-law fit needs at least 4 points, got {}", points.len())));
    }
    if let Some(&(t, v)) = points.iter().find(|&&(t, v)| !(t > 0.0 && v > 0.0)) {
        return Err(Error::invalid(format!("power-law fit needs positive data, got ({t}, {v})")));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = neumaier_sum(xs.iter().copied()) / n;
    let my = neumaier_sum(ys.iter().copied()) / n;
    let sxx = neumaier_sum(xs.iter().map(|x| (x - mx).powi(2)));
    let sxy = neumaier_sum(xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)));
    let syy = neumaier_sum(ys.iter().map(|y| (y - my).powi(2)));
    if !(sxx > 0.0) {
        return Err(Error::invalid("power-law fit needs at least two distinct times"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res = neumaier_sum(xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)));
    let r_squared = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };
    let t_min = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let t_max = points.iter().map(|p| p.0).fold(0.0, f64::max);
    Ok(FitResult {
        exponent: slope,
        log_coefficient: intercept,
        coefficient: intercept.exp(),
        r_squared,
        t_window: (t_min, t_max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn lattice(a: f64, alpha: f64) -> RadiusProfile {
        RadiusProfile::new(a, alpha).unwrap()
    }

    #[test]
    fn riesz_in_closed_forms() {
        assert_relative_eq!(riesz_in(1, 0.0).unwrap().value, 4.0, max_relative = 1e-13);
        assert_relative_eq!(riesz_in(1, 0.5).unwrap().value, 16.0 * 2f64.sqrt() / 3.0, max_relative = 1e-12);
        for m in 1..=4 {
            let w = unit_ball_volume(m);
            assert_relative_eq!(riesz_in(m, 0.0).unwrap().value, w * w, max_relative = 1e-12);
        }
        // m = 1: 2 ∫_0^2 (2-r) r^{-s} dr = 2^{3-s} (1/(1-s) - 1/(2-s)).
        for &s in &[0.1, 0.7, 0.95] {
            let exact = 2f64.powf(3.0 - s) * (1.0 / (1.0 - s) - 1.0 / (2.0 - s));
            assert_relative_eq!(riesz_in(1, s).unwrap().value, exact, max_relative = 1e-11);
        }
        assert!(riesz_in(2, 2.0).is_err());
    }

    #[test]
    fn riesz_out_closed_forms() {
        assert_relative_eq!(riesz_out(1, 1.5).unwrap().value, 8.0 * 2f64.sqrt(), max_relative = 1e-12);
        // m = 1: 2^{3-s} / ((s-1)(2-s)).
        for &s in &[1.05, 1.3, 1.9] {
            let exact = 2f64.powf(3.0 - s) / ((s - 1.0) * (2.0 - s));
            assert_relative_eq!(riesz_out(1, s).unwrap().value, exact, max_relative = 1e-11);
        }
        assert!(riesz_out(2, 2.0 + 1e-7).is_err());
        assert!(riesz_out(2, 3.0).is_err());
        assert!(riesz_out(2, 2.0 + 2e-6).unwrap().value > 1e5);
    }

    #[test]
    fn coefficients() {
        let c1 = c_coeff(2, 0.4, 0.25).unwrap().value;
        let c2 = c_coeff(2, 0.4, 0.5).unwrap().value;
        assert!(c1 > 0.0 && c1.is_finite());
        assert_relative_eq!(c2 / c1, 2f64.powf(2.5), max_relative = 1e-13);
        let d = d_coeff(2, 0.75, 0.25).unwrap().value;
        assert!(d > 0.0 && d.is_finite());
        assert!(c_coeff(2, 0.5, 0.25).is_err());
        assert!(d_coeff(2, 1.0, 0.25).is_err());
        assert!(d_coeff(2, 0.75, 0.6).is_err());
    }

    #[test]
    fn regimes_from_the_case_list() {
        let law = classify_regime(2, lattice(0.25, 0.4), Family::Lattice).unwrap();
        assert_eq!(law.regime, Regime::LatticeContent);
        assert_relative_eq!(law.exponent, -0.25, max_relative = 1e-14);
        assert_eq!(law.coefficient, Some(c_coeff(2, 0.4, 0.25).unwrap().value));

        let law = classify_regime(2, lattice(0.25, 0.75), Family::Lattice).unwrap();
        assert_eq!((law.regime, law.quantity), (Regime::LatticeLoss, Quantity::F));
        assert_relative_eq!(law.exponent, 1.0 / 3.0, max_relative = 1e-14);

        let law = classify_regime(3, lattice(0.25, 1.0), Family::Lattice).unwrap();
        assert_eq!((law.regime, law.remainder), (Regime::Perimeter, Remainder::TLogT));
        let law = classify_regime(3, lattice(0.25, 1.5), Family::Lattice).unwrap();
        assert_eq!(law.remainder, Remainder::T);
        let law = classify_regime(3, lattice(0.25, 0.8), Family::Lattice).unwrap();
        assert_eq!(law.regime, Regime::Perimeter);
        match law.remainder {
            Remainder::Power { p } => assert_relative_eq!(p, 0.875, max_relative = 1e-14),
            other => panic!("unexpected remainder {other:?}"),
        }
        let law = classify_regime(2, lattice(0.25, 1.5), Family::Lattice).unwrap();
        assert_eq!(law.regime, Regime::Perimeter);

        for alpha in [0.25, 0.5, 1.0] {
            let law = classify_regime(2, lattice(0.25, alpha), Family::Lattice).unwrap();
            assert_eq!(law.regime, Regime::NotCovered, "alpha={alpha}");
        }
        let law = classify_regime(2, lattice(0.25, 0.42), Family::Chain).unwrap();
        assert_eq!((law.regime, law.remainder), (Regime::ChainContent, Remainder::TwoSidedOnly));
        assert_relative_eq!(law.exponent, (0.84 - 1.0) / 0.84, max_relative = 1e-14);
        let law = classify_regime(2, lattice(0.25, 0.3), Family::Chain).unwrap();
        assert_eq!(law.regime, Regime::NotCovered);
    }

    #[test]
    fn perimeter_coefficient_matches_zeta() {
        // m = 3, α = 1: 4π a² ζ(2) = 4π a² π²/6.
        let law = classify_regime(3, lattice(0.25, 1.0), Family::Lattice).unwrap();
        let expect = 4.0 * PI * 0.0625 * PI * PI / 6.0 / PI.sqrt();
        assert_relative_eq!(law.coefficient.unwrap(), expect, max_relative = 1e-6);
    }

    #[test]
    fn fit_window_controls_contamination() {
        let law = classify_regime(2, lattice(0.25, 0.4), Family::Lattice).unwrap();
        let (lo, hi) = law.default_fit_window();
        assert_relative_eq!(hi / lo, 10.0, max_relative = 1e-12);
        assert_relative_eq!(law.contamination(hi).unwrap(), FIT_CONTAMINATION, max_relative = 1e-9);
        assert_relative_eq!(hi, FIT_CONTAMINATION.powi(4), max_relative = 1e-9);
        let law = classify_regime(3, lattice(0.25, 1.0), Family::Lattice).unwrap();
        let (_, hi) = law.default_fit_window();
        assert_relative_eq!(law.contamination(hi).unwrap(), FIT_CONTAMINATION, max_relative = 1e-9);
    }

    #[test]
    fn exact_power_laws_fit_exactly() {
        let pts: Vec<(f64, f64)> = (0..8).map(|k| 10f64.powf(-6.0 + 0.5 * k as f64)).map(|t| (t, 3.0 * t.sqrt())).collect();
        let fit = fit_power_law(&pts).unwrap();
        assert_relative_eq!(fit.exponent, 0.5, max_relative = 1e-12);
        assert_relative_eq!(fit.coefficient, 3.0, max_relative = 1e-10);
        assert_relative_eq!(fit.r_squared, 1.0, max_relative = 1e-12);
        let flat: Vec<(f64, f64)> = pts.iter().map(|&(t, _)| (t, 2.0)).collect();
        let fit = fit_power_law(&flat).unwrap();
        assert!(fit.exponent.abs() < 1e-14);
        assert_eq!(fit.r_squared, 1.0);
        assert!(fit_power_law(&pts[..3]).is_err());
        assert!(fit_power_law(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0), (4.0, 1.0)]).is_err());
    }

    #[test]
    fn perturbed_power_law_fit() {
        let c = 0.4;
        let pts: Vec<(f64, f64)> = (0..12)
            .map(|k| 10f64.powf(-4.0 + 2.0 * k as f64 / 11.0))
            .map(|t| (t, c * t.powf(-0.25) * (1.0 + 0.05 * t.powf(0.25) * (k_noise(t)))))
            .collect();
        let fit = fit_power_law(&pts).unwrap();
        assert!((fit.exponent + 0.25).abs() < 0.02, "{fit:?}");
    }

    fn k_noise(t: f64) -> f64 {
        (1e3 * t).sin()
    }
}
