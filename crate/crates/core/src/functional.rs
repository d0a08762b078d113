//! Ball-average functionals `G_μ(t) = ∫_Ω μ_Ω(x;√t)/|B(x;√t)| dx` and
//! `G_ν(t)`, the constants that sandwich heat content and heat loss
//! between multiples of them, and pass/fail reports of those sandwiches.
//!
//! In `ℝ^m` the ball volume `ω_m t^{m/2}` is constant and is divided out at
//! the end. The numerator splits over ordered pairs of balls `(i, j)` into
//! `∫_{B_i}∫_{B_j} 1[|x-y| < √t] dy dx`, which is a covariogram integral
//! with a spherical-cap weight. For `i = j` it scales as `r^{2m} P(√t/r)`
//! with a one-variable profile `P` that is tabulated once per dimension.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::content::{candidate_pairs, Configuration, HeadSize};
use crate::error::{Error, Result};
use crate::geometry::{
    deficit_volume, lattice_points, make_lattice_config, overlap_volume, unit_ball_volume, unit_sphere_area, BallUnion,
    RadiusProfile,
};
use crate::kernel::{covariogram_integral, LiYauConstants, Time};
use crate::numerics::{integrate, unit_sphere_cap_fraction, Endpoint, LogLogTable, QuadratureSpec, ValueWithError};

/// Explicit constants of both sandwich inequalities for one choice of
/// Li-Yau constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub m: usize,
    pub lyc: LiYauConstants,
    pub k1: f64,
    pub k2: f64,
    pub beta: f64,
    pub l1: f64,
    pub l2: f64,
    pub alpha_r: f64,
}

/// Li-Yau constants that hold with equality-type sharpness for the
/// Gaussian kernel of `ℝ^m`.
pub fn euclidean_liyau_constants(m: usize, d1: f64, d2: f64) -> Result<LiYauConstants> {
    if m == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    LiYauConstants::euclidean(m, d1, d2)
}

fn ratio_power(m: usize, lyc: &LiYauConstants) -> f64 {
    (2.0 * lyc.d2 / lyc.d1).powf(0.5 * m as f64)
}

/// `(K_1, K_2, β)` of the heat content sandwich.
pub fn theorem1_constants(m: usize, lyc: &LiYauConstants) -> Result<(f64, f64, f64)> {
    let mf = m as f64;
    let k1 = lyc.c1 * 2f64.powf(-0.5 * mf) * (-1.0 / (2.0 * lyc.d1)).exp();
    let log_term = (2.0 * lyc.c2 / lyc.c1 * ratio_power(m, lyc)).ln();
    let beta = 4.0 / mf * log_term;
    let k2 = 2f64.powf(1.0 + 2.0 * mf) * lyc.c2 * (lyc.d2 * log_term).powf(0.75 * mf);
    if !(beta >= 1.0) {
        return Err(Error::invalid(format!("beta = {beta} fell below 1")));
    }
    Ok((k1, k2, beta))
}

/// `(L_1, L_2, α_R)` of the heat loss sandwich.
pub fn theorem2_constants(m: usize, lyc: &LiYauConstants) -> Result<(f64, f64, f64)> {
    let mf = m as f64;
    let l1 = 2f64.powf(-0.5 * mf) * (-1.0 / (2.0 * lyc.d1)).exp() * lyc.c1;
    let log_term = (6.0 * lyc.c2 * lyc.d2 / (lyc.c1 * lyc.d1) * ratio_power(m, lyc)).ln();
    let alpha_r = (4.0 * lyc.d2 * log_term).sqrt();
    let l2 = 5.0 * 2f64.powf(1.0 + mf) * 3f64.powf(0.5 * mf) * lyc.c2 * (lyc.d2 * log_term).powf((4.0 + 3.0 * mf) / 4.0);
    if !(alpha_r > 2.0) {
        return Err(Error::invalid(format!("alpha_R = {alpha_r} is not above 2")));
    }
    Ok((l1, l2, alpha_r))
}

pub fn bound_constants(m: usize, lyc: &LiYauConstants) -> Result<BoundConstants> {
    let (k1, k2, beta) = theorem1_constants(m, lyc)?;
    let (l1, l2, alpha_r) = theorem2_constants(m, lyc)?;
    Ok(BoundConstants {
        m,
        lyc: *lyc,
        k1,
        k2,
        beta,
        l1,
        l2,
        alpha_r,
    })
}

/// Which single-ball profile: inside (`μ`) or outside (`ν`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Inside,
    Outside,
}

/// `P_μ(s) = ∫_{B_1}|B(x;s) ∩ B_1| dx` or `P_ν(s) = ∫_{B_1}|B(x;s) \ B_1| dx`
/// for the unit ball, by quadrature over the covariogram.
fn profile_direct(m: usize, side: Side, s: f64, spec: &QuadratureSpec) -> Result<ValueWithError> {
    let omega = unit_ball_volume(m);
    if s >= 2.0 {
        // B(x;s) swallows the unit ball.
        let v = match side {
            Side::Inside => omega * omega,
            Side::Outside => omega * omega * (s.powi(m as i32) - 1.0),
        };
        return Ok(ValueWithError::new(v, 4.0 * f64::EPSILON * v));
    }
    let area = unit_sphere_area(m);
    let mi = m as i32;
    let f = |rho: f64| {
        let g = match side {
            Side::Inside => overlap_volume(m, 1.0, 1.0, rho),
            Side::Outside => deficit_volume(m, 1.0, 1.0, rho),
        };
        area * rho.powi(mi - 1) * g
    };
    integrate(f, 0.0, s, Endpoint::Regular, Endpoint::Regular, spec)
}

const PROFILE_LOG10_MIN: f64 = -7.0;
const PROFILE_NODES_PER_DECADE: usize = 64;

struct ProfileTable {
    inside: LogLogTable,
    outside: LogLogTable,
}

static PROFILES: OnceLock<Mutex<HashMap<usize, Arc<ProfileTable>>>> = OnceLock::new();

fn profile_table(m: usize) -> Result<Arc<ProfileTable>> {
    let map = PROFILES.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = map.lock().unwrap_or_else(|e| e.into_inner());
    if let Some(t) = guard.get(&m) {
        return Ok(Arc::clone(t));
    }
    let spec = QuadratureSpec::with_tolerances(1e-13, 0.0);
    let hi = 2f64.log10();
    let inside = LogLogTable::build(PROFILE_LOG10_MIN, hi, PROFILE_NODES_PER_DECADE, |s| {
        profile_direct(m, Side::Inside, s, &spec)
    })?;
    let outside = LogLogTable::build(PROFILE_LOG10_MIN, hi, PROFILE_NODES_PER_DECADE, |s| {
        profile_direct(m, Side::Outside, s, &spec)
    })?;
    let table = Arc::new(ProfileTable { inside, outside });
    guard.insert(m, Arc::clone(&table));
    Ok(table)
}

fn profile_value(m: usize, side: Side, s: f64, rel_budget: f64) -> Result<ValueWithError> {
    if s < 2.0 {
        let table = profile_table(m)?;
        let hit = match side {
            Side::Inside => table.inside.lookup(s),
            Side::Outside => table.outside.lookup(s),
        };
        if let Some((v, rel)) = hit {
            if rel <= rel_budget {
                return Ok(ValueWithError::new(v, rel * v));
            }
        }
    }
    let spec = QuadratureSpec::with_tolerances(rel_budget.clamp(1e-13, 1e-6), 0.0);
    profile_direct(m, side, s, &spec)
}

/// `Σ_i r_i^{2m} P(R/r_i)` in index order.
fn diagonal(m: usize, radii: &[f64], big_r: f64, side: Side, rel_budget: f64) -> Result<ValueWithError> {
    let terms: Vec<Result<ValueWithError>> = radii
        .par_iter()
        .map(|&r| Ok(profile_value(m, side, big_r / r, rel_budget)?.scale(r.powi(2 * m as i32))))
        .collect();
    let mut vals = Vec::with_capacity(terms.len());
    for v in terms {
        vals.push(v?);
    }
    Ok(vals.into_iter().sum())
}

/// `∫_{B(0;r1)}∫_{B(d e_1;r2)} 1[|x-y| < R] dy dx` for `d > 0`.
pub fn indicator_pair_integral(m: usize, r1: f64, r2: f64, d: f64, big_r: f64, spec: &QuadratureSpec) -> Result<ValueWithError> {
    if !(d > 0.0) {
        return Err(Error::invalid("indicator pair integral needs distinct centers"));
    }
    if d - r1 - r2 >= big_r {
        return Ok(ValueWithError::ZERO);
    }
    let weight = |rho: f64| {
        if rho <= 0.0 {
            return if d < big_r { 1.0 } else { 0.0 };
        }
        unit_sphere_cap_fraction(m, (d * d + rho * rho - big_r * big_r) / (2.0 * d * rho))
    };
    // The weight switches on at |d - R| and saturates at d + R.
    let breaks = [(d - big_r).abs(), d + big_r];
    let v = covariogram_integral(m, r1, r2, &weight, &breaks, spec)?;
    Ok(v.with_extra_error(1e-13 * v.value.abs()))
}

const TABLE_SHARE: f64 = 0.1;
const PAIR_SHARE: f64 = 0.4;

fn check_rel_tol(rel_tol: f64) -> Result<()> {
    if rel_tol > 0.0 && rel_tol < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("rel_tol must lie in (0, 1), got {rel_tol}")))
    }
}

fn table_budget(rel_tol: f64) -> f64 {
    (TABLE_SHARE * rel_tol).max(1e-12)
}

/// Unordered-pair total `Σ_{i<j} ∫_{B_i}∫_{B_j} 1[|x-y| < R]`.
fn pair_sum(u: &BallUnion, big_r: f64, budget: f64) -> Result<(ValueWithError, usize)> {
    if u.len() < 2 {
        return Ok((ValueWithError::ZERO, 0));
    }
    let m = u.dim();
    let balls = u.balls();
    // Gaps are compared with `<`: touching at distance exactly R contributes nothing.
    let cands: Vec<_> = candidate_pairs(u, big_r, big_r * big_r)
        .into_iter()
        .filter(|c| c.d - balls[c.i].radius - balls[c.j].radius < big_r)
        .collect();
    let eps = PAIR_SHARE * budget / cands.len().max(1) as f64;
    let spec = QuadratureSpec {
        rel_tol: 1e-11,
        abs_tol: eps,
        max_subdivisions: 2000,
    };
    let results: Vec<Result<ValueWithError>> = cands
        .par_iter()
        .map(|c| indicator_pair_integral(m, balls[c.i].radius, balls[c.j].radius, c.d, big_r, &spec))
        .collect();
    let mut vals = Vec::with_capacity(results.len());
    for r in results {
        vals.push(r?);
    }
    Ok((vals.into_iter().sum(), cands.len()))
}

fn finish(g: ValueWithError, rel_tol: f64, what: &str, t: f64) -> Result<ValueWithError> {
    if g.error_bound > rel_tol * g.value.abs() {
        return Err(Error::Numerical {
            message: format!("{what} at t={t} did not reach relative error {rel_tol:.3e}"),
            best: g,
        });
    }
    Ok(g)
}

fn finite_functional(u: &BallUnion, t: f64, rel_tol: f64, side: Side) -> Result<ValueWithError> {
    check_rel_tol(rel_tol)?;
    let m = u.dim();
    let big_r = t.sqrt();
    let radii: Vec<f64> = u.balls().iter().map(|b| b.radius).collect();
    let diag = diagonal(m, &radii, big_r, side, table_budget(rel_tol))?;
    let (pairs, _) = pair_sum(u, big_r, rel_tol * diag.value)?;
    let cross = pairs.scale(2.0);
    let total = match side {
        Side::Inside => diag + cross,
        Side::Outside => diag - cross,
    };
    let vol = unit_ball_volume(m) * t.powf(0.5 * m as f64);
    let what = match side {
        Side::Inside => "mu functional",
        Side::Outside => "nu functional",
    };
    finish(total.scale(1.0 / vol), rel_tol, what, t)
}

/// `∫_Ω μ_Ω(x;√t) dx / (ω_m t^{m/2})` for a finite union.
pub fn mu_functional(u: &BallUnion, t: Time, rel_tol: f64) -> Result<ValueWithError> {
    finite_functional(u, t.get(), rel_tol, Side::Inside)
}

/// `∫_Ω ν_Ω(x;√t) dx / (ω_m t^{m/2})` for a finite union, computed from
/// the exterior parts directly rather than as `|Ω| - G_μ`.
pub fn nu_functional(u: &BallUnion, t: Time, rel_tol: f64) -> Result<ValueWithError> {
    finite_functional(u, t.get(), rel_tol, Side::Outside)
}

/// `Σ_{i ≥ start} r_i^{2m} P(R/r_i)` as an integral over `i`.
///
/// Both profiles make the summand increase with `r`, hence decrease in
/// `i`. Below `r = R/2` the profile has a closed form.
fn tail_integral(m: usize, profile: RadiusProfile, start: f64, big_r: f64, side: Side, rel_budget: f64) -> Result<ValueWithError> {
    let (a, alpha) = (profile.a, profile.alpha);
    let mf = m as f64;
    let omega = unit_ball_volume(m);
    let r0 = a * start.powf(-alpha);
    let pre = a.powf(1.0 / alpha) / alpha;
    // i = (a/r)^{1/α}: Σ → pre ∫_0^{r0} r^{2m - 1/α - 1} P(R/r) dr
    let e2 = 2.0 * mf - 1.0 / alpha;
    let e1 = mf - 1.0 / alpha;
    let rc = r0.min(0.5 * big_r);
    let near = match side {
        Side::Inside => omega * omega * rc.powf(e2) / e2,
        Side::Outside => omega * omega * (big_r.powi(m as i32) * rc.powf(e1) / e1 - rc.powf(e2) / e2),
    };
    let mut total = ValueWithError::new(near, 1e-14 * near.abs());
    if r0 > rc {
        let err = std::cell::Cell::new(0.0f64);
        let f = |r: f64| match profile_value(m, side, big_r / r, rel_budget) {
            Ok(v) => {
                err.set(err.get().max(v.error_bound / v.value.max(f64::MIN_POSITIVE)));
                r.powf(e2 - 1.0) * v.value
            }
            Err(_) => f64::NAN,
        };
        let spec = QuadratureSpec::with_tolerances(rel_budget.max(1e-11), 0.0);
        let v = integrate(f, rc, r0, Endpoint::Regular, Endpoint::Regular, &spec)?;
        if !v.value.is_finite() {
            return Err(Error::Numerical {
                message: "tail integral evaluation failed".into(),
                best: v,
            });
        }
        total = total + v.with_extra_error(err.get() * v.value);
    }
    Ok(total.scale(pre))
}

const AUTO_HEAD_START: usize = 1024;
const AUTO_HEAD_MAX: usize = 1 << 21;

fn lattice_functional(
    m: usize,
    profile: RadiusProfile,
    t: f64,
    rel_tol: f64,
    head: HeadSize,
    side: Side,
) -> Result<ValueWithError> {
    check_rel_tol(rel_tol)?;
    if m == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    if !(profile.a < 0.5) {
        return Err(Error::invalid("lattice needs a < 1/2"));
    }
    let mf = m as f64;
    match side {
        Side::Inside if !(2.0 * mf * profile.alpha > 1.0) => {
            return Err(Error::invalid("mu functional of the lattice is infinite for 2 m alpha <= 1"))
        }
        Side::Outside if !(mf * profile.alpha > 1.0) => {
            return Err(Error::invalid("nu functional needs finite measure, but m alpha <= 1"))
        }
        _ => {}
    }
    let big_r = t.sqrt();
    let rb = table_budget(rel_tol);
    let probe: Vec<f64> = (1..=AUTO_HEAD_START).map(|i| profile.radius(i)).collect();
    let budget = rel_tol * diagonal(m, &probe, big_r, side, rb)?.lower();
    let n = match head {
        HeadSize::Fixed(n) if n >= 1 => n,
        HeadSize::Fixed(_) => return Err(Error::invalid("lattice head needs at least one ball")),
        HeadSize::Auto => {
            let mut n = AUTO_HEAD_START;
            loop {
                let r = profile.radius(n);
                let width = r.powi(2 * m as i32) * profile_value(m, side, big_r / r, rb)?.upper();
                if width <= 0.2 * budget || n >= AUTO_HEAD_MAX {
                    break n;
                }
                n *= 2;
            }
        }
    };
    // Pairs touching the tail are at least this far apart.
    let tail_gap = 1.0 - profile.a - profile.radius(n + 1);
    if big_r >= tail_gap {
        return Err(Error::invalid(format!(
            "sqrt(t) = {big_r} reaches the lattice tail (gap {tail_gap}); use a finite union"
        )));
    }
    let radii: Vec<f64> = (1..=n).map(|i| profile.radius(i)).collect();
    let head_diag = diagonal(m, &radii, big_r, side, rb)?;
    let hi = tail_integral(m, profile, n as f64, big_r, side, rb)?;
    let lo = tail_integral(m, profile, n as f64 + 1.0, big_r, side, rb)?;
    let tail = ValueWithError::from_interval(lo.lower(), hi.upper());
    let mut total = head_diag + tail;
    if big_r > 1.0 - 2.0 * profile.a {
        let u = make_lattice_config(m, profile.a, profile.alpha, n)?;
        debug_assert_eq!(lattice_points(m, n).len(), u.len());
        let (pairs, _) = pair_sum(&u, big_r, budget)?;
        total = match side {
            Side::Inside => total + pairs.scale(2.0),
            Side::Outside => total - pairs.scale(2.0),
        };
    }
    let vol = unit_ball_volume(m) * t.powf(0.5 * mf);
    let what = match side {
        Side::Inside => "lattice mu functional",
        Side::Outside => "lattice nu functional",
    };
    finish(total.scale(1.0 / vol), rel_tol, what, t)
}

/// `G_μ(t)` for the infinite lattice union with radii `a i^{-α}`.
pub fn lattice_mu_functional(m: usize, profile: RadiusProfile, t: Time, rel_tol: f64, head: HeadSize) -> Result<ValueWithError> {
    lattice_functional(m, profile, t.get(), rel_tol, head, Side::Inside)
}

/// `G_ν(t)` for the infinite lattice union; requires `mα > 1`.
pub fn lattice_nu_functional(m: usize, profile: RadiusProfile, t: Time, rel_tol: f64, head: HeadSize) -> Result<ValueWithError> {
    lattice_functional(m, profile, t.get(), rel_tol, head, Side::Outside)
}

impl Configuration {
    pub fn mu_functional(&self, t: Time, rel_tol: f64) -> Result<ValueWithError> {
        match self {
            Configuration::Finite(u) => mu_functional(u, t, rel_tol),
            Configuration::Lattice { m, profile, head } => lattice_mu_functional(*m, *profile, t, rel_tol, *head),
        }
    }

    pub fn nu_functional(&self, t: Time, rel_tol: f64) -> Result<ValueWithError> {
        match self {
            Configuration::Finite(u) => nu_functional(u, t, rel_tol),
            Configuration::Lattice { m, profile, head } => lattice_nu_functional(*m, *profile, t, rel_tol, *head),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Which {
    /// `K_1 G_μ ≤ H ≤ K_2 G_μ`.
    Theorem1,
    /// `L_1 G_ν ≤ F ≤ L_2 G_ν`.
    Theorem2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichPoint {
    pub t: f64,
    pub g: ValueWithError,
    pub value: ValueWithError,
    pub lower: f64,
    pub upper: f64,
    /// Slack allowed on either side: the error of the value plus the
    /// larger constant times the error of the functional.
    pub err: f64,
    pub pass_lower: bool,
    pub pass_upper: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub which: Which,
    pub constants: BoundConstants,
    pub points: Vec<SandwichPoint>,
    pub pass: bool,
}

/// Evaluates the chosen sandwich at every `t` of the grid. A point passes
/// when some values inside the computed enclosures satisfy both
/// inequalities; failures are reported, not raised.
pub fn sandwich_report(
    cfg: &Configuration,
    t_grid: &[f64],
    which: Which,
    lyc: &LiYauConstants,
    rel_tol: f64,
) -> Result<SandwichReport> {
    let m = cfg.dim();
    let constants = bound_constants(m, lyc)?;
    if which == Which::Theorem2 && !cfg.has_finite_measure() {
        return Err(Error::invalid("the heat loss sandwich needs a union of finite measure"));
    }
    let (c_lo, c_hi) = match which {
        Which::Theorem1 => (constants.k1, constants.k2),
        Which::Theorem2 => (constants.l1, constants.l2),
    };
    let mut points = Vec::with_capacity(t_grid.len());
    for &tt in t_grid {
        let t = Time::new(tt)?;
        let (g, value) = match which {
            Which::Theorem1 => (cfg.mu_functional(t, rel_tol)?, cfg.heat_content(t, rel_tol)?.h),
            Which::Theorem2 => (cfg.nu_functional(t, rel_tol)?, cfg.heat_loss(t, rel_tol)?),
        };
        let pass_lower = c_lo * g.lower() <= value.upper();
        let pass_upper = value.lower() <= c_hi * g.upper();
        points.push(SandwichPoint {
            t: tt,
            g,
            value,
            lower: c_lo * g.value,
            upper: c_hi * g.value,
            err: value.error_bound + c_hi * g.error_bound,
            pass_lower,
            pass_upper,
            pass: pass_lower && pass_upper,
        });
    }
    let pass = points.iter().all(|p| p.pass);
    Ok(SandwichReport {
        which,
        constants,
        points,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_chain_config, total_measure, Ball, Family};
    use approx::assert_relative_eq;

    fn lyc2() -> LiYauConstants {
        euclidean_liyau_constants(2, 1.9, 2.1).unwrap()
    }

    #[test]
    fn euclidean_constants_values() {
        assert_relative_eq!(lyc2().c1, 0.25, max_relative = 1e-15);
        let c1 = euclidean_liyau_constants(1, 1.9, 2.1).unwrap().c1;
        assert_relative_eq!(c1, 0.564_189_583_547_756_3, max_relative = 1e-14);
        assert!(euclidean_liyau_constants(2, 2.0, 2.1).is_err());
        assert!(euclidean_liyau_constants(2, 1.9, 2.0).is_err());
    }

    #[test]
    fn sandwich_constants_closed_forms() {
        let (k1, k2, beta) = theorem1_constants(2, &lyc2()).unwrap();
        assert_relative_eq!(k1, 0.25 * 0.5 * (-1.0 / 3.8f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(k1, 0.09608, max_relative = 1e-4);
        assert_relative_eq!(beta, 2.0 * (2.0 * 4.2 / 1.9f64).ln(), max_relative = 1e-15);
        assert_relative_eq!(beta, 2.9726, max_relative = 1e-4);
        assert!(k1 <= k2);
        let (l1, l2, alpha_r) = theorem2_constants(2, &lyc2()).unwrap();
        assert_eq!(l1, k1);
        let expected = (8.4 * ((6.0 * 2.1 / 1.9) * (4.2 / 1.9f64)).ln()).sqrt();
        assert_relative_eq!(alpha_r, expected, max_relative = 1e-15);
        assert!(alpha_r > 2.0 && l2 > l1);
    }

    #[test]
    fn unit_interval_profile_matches_arithmetic() {
        // m = 1: ∫_{-1}^{1} |[x-s, x+s] ∩ [-1, 1]| dx = 4s - s² for s ≤ 2.
        let spec = QuadratureSpec::default();
        for &s in &[1e-3, 0.3, 1.0, 1.7, 2.0, 3.5] {
            let inside = profile_direct(1, Side::Inside, s, &spec).unwrap();
            let expect = if s <= 2.0 { 4.0 * s - s * s } else { 4.0 };
            assert_relative_eq!(inside.value, expect, max_relative = 1e-12);
            let outside = profile_direct(1, Side::Outside, s, &spec).unwrap();
            assert_relative_eq!(inside.value + outside.value, 4.0 * s, max_relative = 1e-12);
        }
    }

    #[test]
    fn profile_table_agrees_with_direct_off_grid() {
        let spec = QuadratureSpec::with_tolerances(1e-13, 0.0);
        for m in 1..=3 {
            for &s in &[2.3e-7, 1.1e-4, 0.0371, 0.52, 1.33, 1.97] {
                for side in [Side::Inside, Side::Outside] {
                    let tab = profile_value(m, side, s, 1e-9).unwrap();
                    let direct = profile_direct(m, side, s, &spec).unwrap();
                    assert!(
                        (tab.value - direct.value).abs() <= tab.error_bound + direct.error_bound + 1e-14 * direct.value,
                        "m={m} s={s} {side:?}: {tab} vs {direct}"
                    );
                }
            }
        }
    }

    #[test]
    fn indicator_pairs_on_the_line() {
        // ∫_{I1}|[x-R, x+R] ∩ I2| dx by a fine midpoint rule.
        let (r1, r2, d) = (0.25, 0.15, 0.6);
        for &big_r in &[0.05, 0.2, 0.4, 1.5] {
            let n = 400_000;
            let h = 2.0 * r1 / n as f64;
            let mut s = 0.0;
            for k in 0..n {
                let x = -r1 + (k as f64 + 0.5) * h;
                let lo = (x - big_r).max(d - r2);
                let hi = (x + big_r).min(d + r2);
                s += (hi - lo).max(0.0) * h;
            }
            let v = indicator_pair_integral(1, r1, r2, d, big_r, &QuadratureSpec::default()).unwrap();
            assert!((v.value - s).abs() < 1e-9, "R={big_r}: {v} vs {s}");
        }
    }

    #[test]
    fn indicator_pair_matches_polar_quadrature_in_the_plane() {
        // ∫_{B(0;r1)} |B(x;R) ∩ B(d e1; r2)| dx in polar coordinates about 0.
        let (r1, r2, d, big_r) = (0.3, 0.2, 0.55, 0.12);
        let spec = QuadratureSpec::with_tolerances(1e-11, 1e-15);
        let inner = |rr: f64| {
            let g = |th: f64| {
                let (x, y) = (rr * th.cos(), rr * th.sin());
                overlap_volume(2, big_r, r2, ((x - d).powi(2) + y * y).sqrt())
            };
            2.0 * rr * integrate(g, 0.0, std::f64::consts::PI, Endpoint::Regular, Endpoint::Regular, &spec).unwrap().value
        };
        let polar = integrate(inner, 0.0, r1, Endpoint::Regular, Endpoint::Regular, &spec).unwrap().value;
        let v = indicator_pair_integral(2, r1, r2, d, big_r, &QuadratureSpec::default()).unwrap();
        assert_relative_eq!(v.value, polar, max_relative = 1e-8);
    }

    #[test]
    fn single_ball_limits() {
        let u = BallUnion::new(2, vec![Ball::new(vec![0.0, 0.0], 1.0).unwrap()], Family::Custom, None).unwrap();
        let vol = std::f64::consts::PI;
        let small = mu_functional(&u, Time::new(1e-10).unwrap(), 1e-8).unwrap();
        assert_relative_eq!(small.value, vol, max_relative = 1e-4);
        for &t in &[1e-4, 0.1, 1.0, 10.0] {
            let g = mu_functional(&u, Time::new(t).unwrap(), 1e-8).unwrap();
            assert!(g.lower() <= vol);
            let nu = nu_functional(&u, Time::new(t).unwrap(), 1e-8).unwrap();
            assert!((g.value + nu.value - vol).abs() <= g.error_bound + nu.error_bound + 1e-14);
        }
        let tiny = nu_functional(&u, Time::new(1e-12).unwrap(), 1e-8).unwrap();
        assert!(tiny.value < 1e-5);
    }

    #[test]
    fn mu_plus_nu_is_measure_for_touching_chain() {
        let u = make_chain_config(2, 0.25, 0.75, 300).unwrap();
        let t = Time::new(1e-4).unwrap();
        let mu = mu_functional(&u, t, 1e-11).unwrap();
        let nu = nu_functional(&u, t, 1e-11).unwrap();
        let vol = total_measure(&u);
        assert_relative_eq!(mu.value + nu.value, vol, max_relative = 1e-10);
    }

    #[test]
    fn lattice_functional_head_independence() {
        let p = RadiusProfile::new(0.25, 0.75).unwrap();
        let t = Time::new(1e-4).unwrap();
        let a = lattice_mu_functional(2, p, t, 1e-5, HeadSize::Fixed(500)).unwrap();
        let b = lattice_mu_functional(2, p, t, 1e-8, HeadSize::Auto).unwrap();
        assert!(a.agrees_with(&b, 0.0), "{a} vs {b}");
        let nu = lattice_nu_functional(2, p, t, 1e-8, HeadSize::Auto).unwrap();
        let cfg = Configuration::Lattice {
            m: 2,
            profile: p,
            head: HeadSize::Auto,
        };
        let vol = cfg.measure().unwrap();
        let sum = b + nu;
        assert!(sum.agrees_with(&vol, 0.0), "{sum} vs {vol}");
    }

    #[test]
    fn lattice_large_radius_pairs_match_finite_union() {
        // With √t above 1 - 2a neighbouring balls interact; the head of the
        // infinite lattice must then reproduce the finite computation.
        let p = RadiusProfile::new(0.45, 2.0).unwrap();
        let t = Time::new(0.04).unwrap();
        let inf = lattice_mu_functional(2, p, t, 1e-9, HeadSize::Fixed(2000)).unwrap();
        let fin = mu_functional(&make_lattice_config(2, 0.45, 2.0, 2000).unwrap(), t, 1e-9).unwrap();
        assert!(inf.lower() >= fin.lower() - 1e-12);
        assert!(inf.upper() - fin.value < 1e-6);
    }

    #[test]
    fn sandwich_single_ball_passes() {
        let u = BallUnion::new(2, vec![Ball::new(vec![0.0, 0.0], 0.5).unwrap()], Family::Custom, None).unwrap();
        let grid = [1e-5, 1e-3, 1e-1, 1.0];
        let cfg = Configuration::Finite(u);
        for which in [Which::Theorem1, Which::Theorem2] {
            let rep = sandwich_report(&cfg, &grid, which, &lyc2(), 1e-8).unwrap();
            assert!(rep.pass, "{which:?}: {rep:?}");
            assert_eq!(rep.points.len(), grid.len());
        }
    }
}
