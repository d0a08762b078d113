//! Heat content and heat loss of disjoint ball unions.
//!
//! For `Ω = ∪ B_i`, `H_Ω = Σ_i H_{B_i} + Σ_{i≠j} C_ij` where `C_ij` is the
//! heat exchanged between two balls. Single-ball terms come from the unit
//! ball memo table; pair terms are integrated when they matter, enclosed
//! between kernel extremes when that is tight enough, and otherwise dropped
//! with their Gaussian upper bound charged to the error.

use std::collections::HashMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{distance, lattice_points, unit_ball_volume, BallUnion, Family, RadiusProfile};
use crate::kernel::{ball_temperature, cross_heat_upper_bound, gaussian_pair_integral, unit_value, Time, UnitQuantity};
use crate::numerics::{integrate_semi_infinite, neumaier_sum, Endpoint, QuadratureSpec, ValueWithError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatContentResult {
    pub t: f64,
    pub h: ValueWithError,
    /// Sum of single-ball contents (including the tail estimate, if any).
    pub diag: f64,
    /// Explicitly evaluated exchange between distinct balls, over ordered pairs.
    pub cross: f64,
    pub dropped_cross_bound: f64,
    pub tail_bound: f64,
    /// Number of balls treated individually.
    pub n_balls: usize,
    /// Number of unordered pairs integrated or enclosed.
    pub n_pairs: usize,
}

/// Temperature of the union: the sum of single-ball temperatures.
pub fn union_temperature(u: &BallUnion, x: &[f64], t: Time) -> f64 {
    let m = u.dim();
    neumaier_sum(u.balls().iter().map(|b| ball_temperature(m, &b.center, b.radius, x, t))).min(1.0)
}

// Fractions of the error budget spent on each approximation.
const TABLE_SHARE: f64 = 0.1;
const DROP_SHARE: f64 = 0.1;
const ENCLOSE_SHARE: f64 = 0.1;
const FAR_SHARE: f64 = 0.1;
// Smallest pair-enumeration radius, as a multiple of 4t in gap².
const MIN_GAP_EXPONENT: f64 = 36.0;
// Unions up to this size bound non-enumerated pairs exactly.
const EXACT_FAR_LIMIT: usize = 20_000;

fn pair_spec(abs_tol: f64) -> QuadratureSpec {
    QuadratureSpec {
        rel_tol: 1e-10,
        abs_tol,
        max_subdivisions: 2000,
    }
}

/// Single-ball sum `Σ r_i^m Q_1(t/r_i²)` in index order.
fn diagonal(m: usize, radii: &[f64], t: f64, q: UnitQuantity, rel_budget: f64) -> Result<ValueWithError> {
    let mi = m as i32;
    let terms: Vec<Result<ValueWithError>> = radii
        .par_iter()
        .map(|&r| Ok(unit_value(m, q, t / (r * r), rel_budget)?.scale(r.powi(mi))))
        .collect();
    let mut vals = Vec::with_capacity(terms.len());
    for v in terms {
        vals.push(v?);
    }
    Ok(vals.into_iter().sum())
}

/// `θ(q) - 1 = 2 Σ_{k≥1} e^{-q k²}`, summed directly.
fn theta_minus_one(q: f64) -> f64 {
    let mut s = 0.0;
    let mut k = 1.0f64;
    loop {
        let term = (-q * k * k).exp();
        s += term;
        if term < 1e-18 * s || term == 0.0 {
            // Remaining terms are below term·e^{-q(2k+1)}/(1-e^{-2q}).
            let r = (-q * (2.0 * k + 1.0)).exp();
            s += term * r / (1.0 - (-2.0 * q).exp()).max(f64::MIN_POSITIVE);
            break;
        }
        k += 1.0;
    }
    2.0 * s
}

/// `Σ_{w ∈ ℤ^m, w ≠ 0} e^{-q|w|²} = θ(q)^m - 1`.
fn lattice_gauss_sum(m: usize, q: f64) -> f64 {
    let e = theta_minus_one(q);
    (m as f64 * e.ln_1p()).exp_m1()
}

/// `Σ_{w ∈ ℤ^m, |w| ≥ M, w ≠ 0} e^{-q|w|²}`, bounded by splitting the
/// exponent as `ε M² + (1-ε)|w|²`.
fn lattice_gauss_sum_beyond(m: usize, q: f64, big_m: f64) -> f64 {
    [0.0, 0.25, 0.5, 0.75]
        .iter()
        .map(|&eps| (-q * eps * big_m * big_m).exp() * lattice_gauss_sum(m, q * (1.0 - eps)))
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Candidate {
    pub i: usize,
    pub j: usize,
    pub d: f64,
    pub upper: f64,
}

/// Unordered pairs `i < j` with `gap ≤ max_gap`, found by grid hashing.
pub(crate) fn candidate_pairs(u: &BallUnion, max_gap: f64, t: f64) -> Vec<Candidate> {
    let balls = u.balls();
    let m = u.dim();
    let r_max = balls[0].radius;
    let cell = 2.0 * r_max + max_gap;
    let key = |x: &[f64]| -> Vec<i64> { x.iter().map(|c| (c / cell).floor() as i64).collect() };
    let mut grid: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    for (i, b) in balls.iter().enumerate() {
        grid.entry(key(&b.center)).or_default().push(i);
    }
    let offsets: Vec<Vec<i64>> = {
        let mut out = vec![vec![]];
        for _ in 0..m {
            out = out
                .into_iter()
                .flat_map(|v| (-1..=1).map(move |o| {
                    let mut w = v.clone();
                    w.push(o);
                    w
                }))
                .collect();
        }
        out
    };
    let per_ball: Vec<Vec<Candidate>> = (0..balls.len())
        .into_par_iter()
        .map(|i| {
            let bi = &balls[i];
            let k = key(&bi.center);
            let mut found = Vec::new();
            for off in &offsets {
                let nk: Vec<i64> = k.iter().zip(off).map(|(a, b)| a + b).collect();
                if let Some(list) = grid.get(&nk) {
                    for &j in list {
                        if j <= i {
                            continue;
                        }
                        let bj = &balls[j];
                        let d = distance(&bi.center, &bj.center);
                        let gap = (d - bi.radius - bj.radius).max(0.0);
                        if gap <= max_gap {
                            let upper = cross_heat_upper_bound(m, bi.radius, bj.radius, gap, t);
                            found.push(Candidate { i, j, d, upper });
                        }
                    }
                }
            }
            found.sort_by_key(|c| c.j);
            found
        })
        .collect();
    per_ball.into_iter().flatten().collect()
}

/// Exact sum of the Gaussian upper bounds over unordered pairs whose gap
/// exceeds `max_gap`.
fn far_pairs_exact(u: &BallUnion, max_gap: f64, t: f64) -> f64 {
    let balls = u.balls();
    let m = u.dim();
    let rows: Vec<f64> = (0..balls.len())
        .into_par_iter()
        .map(|i| {
            let bi = &balls[i];
            neumaier_sum(balls[i + 1..].iter().filter_map(|bj| {
                let gap = (bi.distance_to(bj) - bi.radius - bj.radius).max(0.0);
                (gap > max_gap).then(|| cross_heat_upper_bound(m, bi.radius, bj.radius, gap, t))
            }))
        })
        .collect();
    neumaier_sum(rows)
}

/// Bound over unordered lattice pairs with gap beyond `max_gap`, using
/// `gap ≥ δ|z_i - z_j|` and `|B_i||B_j| ≤ ω²(r_i^{2m} + r_j^{2m})/2`.
fn far_pairs_lattice(m: usize, sum_r2m: f64, delta: f64, max_gap: f64, t: f64) -> f64 {
    let omega = unit_ball_volume(m);
    let p = (4.0 * PI * t).powf(-0.5 * m as f64);
    let q = delta * delta / (4.0 * t);
    let g = max_gap * max_gap / (4.0 * t);
    let best = [0.25, 0.5, 0.75]
        .iter()
        .map(|&eps| (-eps * g).exp() * lattice_gauss_sum(m, (1.0 - eps) * q))
        .fold(f64::INFINITY, f64::min);
    0.5 * omega * omega * p * sum_r2m * best
}

#[derive(Debug, Clone, Copy)]
struct Exchange {
    /// Ordered-pair total of evaluated terms.
    value: ValueWithError,
    /// Ordered-pair bound on omitted terms.
    dropped: f64,
    n_pairs: usize,
}

/// Heat exchanged between distinct balls of a finite union.
fn exchange(u: &BallUnion, t: f64, budget: f64) -> Result<Exchange> {
    let m = u.dim();
    let balls = u.balls();
    let n = balls.len();
    if n < 2 {
        return Ok(Exchange {
            value: ValueWithError::ZERO,
            dropped: 0.0,
            n_pairs: 0,
        });
    }
    let lattice_delta = u.delta();
    let sum_r2m = neumaier_sum(balls.iter().rev().map(|b| b.radius.powi(2 * m as i32)));
    // Choose the enumeration radius so that what lies beyond fits the budget.
    let mut g_exp = MIN_GAP_EXPONENT;
    let far = loop {
        let max_gap = (4.0 * t * g_exp).sqrt();
        let far = match lattice_delta {
            Some(delta) => far_pairs_lattice(m, sum_r2m, delta, max_gap, t),
            None if n <= EXACT_FAR_LIMIT => far_pairs_exact(u, max_gap, t),
            None => {
                return Err(Error::invalid(format!(
                    "non-lattice unions are limited to {EXACT_FAR_LIMIT} balls, got {n}"
                )))
            }
        };
        if far <= FAR_SHARE * budget || g_exp > 700.0 || lattice_delta.is_none() {
            break (max_gap, far);
        }
        g_exp *= 1.5;
    };
    let (max_gap, far_bound) = far;
    let candidates = candidate_pairs(u, max_gap, t);
    let n_cand = candidates.len().max(1) as f64;
    let eps_drop = DROP_SHARE * budget / n_cand;
    let eps_enc = ENCLOSE_SHARE * budget / n_cand;
    let p = (4.0 * PI * t).powf(-0.5 * m as f64);

    let results: Vec<Result<(ValueWithError, f64, bool)>> = candidates
        .par_iter()
        .map(|c| {
            if c.upper <= eps_drop {
                return Ok((ValueWithError::ZERO, c.upper, false));
            }
            let (r1, r2) = (balls[c.i].radius, balls[c.j].radius);
            // The kernel over the pair lies between its values at the
            // farthest and nearest separations.
            let vols = unit_ball_volume(m).powi(2) * r1.powi(m as i32) * r2.powi(m as i32);
            let far_sep = c.d + r1 + r2;
            let near_sep = (c.d - r1 - r2).max(0.0);
            let lo = vols * p * (-far_sep * far_sep / (4.0 * t)).exp();
            let hi = vols * p * (-near_sep * near_sep / (4.0 * t)).exp();
            if 0.5 * (hi - lo) <= eps_enc {
                return Ok((ValueWithError::from_interval(lo, hi), 0.0, true));
            }
            let v = gaussian_pair_integral(m, r1, r2, c.d, t, &pair_spec(eps_enc))?;
            Ok((v, 0.0, true))
        })
        .collect();
    let mut vals = Vec::with_capacity(results.len());
    let mut dropped = Vec::with_capacity(results.len());
    let mut n_pairs = 0;
    for r in results {
        let (v, d, kept) = r?;
        vals.push(v);
        dropped.push(d);
        n_pairs += kept as usize;
    }
    let value: ValueWithError = vals.into_iter().sum();
    let dropped = neumaier_sum(dropped) + far_bound;
    Ok(Exchange {
        value: value.scale(2.0),
        dropped: 2.0 * dropped,
        n_pairs,
    })
}

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

fn radii(u: &BallUnion) -> Vec<f64> {
    u.balls().iter().map(|b| b.radius).collect()
}

fn finish(result: HeatContentResult, rel_tol: f64) -> Result<HeatContentResult> {
    if result.h.error_bound > rel_tol * result.h.value.abs() {
        return Err(Error::Numerical {
            message: format!(
                "heat content at t={} reached relative error {:.3e}, above the requested {rel_tol:.3e}",
                result.t,
                result.h.error_bound / result.h.value.abs()
            ),
            best: result.h,
        });
    }
    Ok(result)
}

/// `H_Ω(t)` for the finite union `u` exactly as given.
pub fn heat_content(u: &BallUnion, t: Time, rel_tol: f64) -> Result<HeatContentResult> {
    check_rel_tol(rel_tol)?;
    let tt = t.get();
    let m = u.dim();
    let diag = diagonal(m, &radii(u), tt, UnitQuantity::Content, table_budget(rel_tol))?;
    let ex = exchange(u, tt, rel_tol * diag.value)?;
    let h = (diag + ex.value).with_extra_error(ex.dropped);
    finish(
        HeatContentResult {
            t: tt,
            h,
            diag: diag.value,
            cross: ex.value.value,
            dropped_cross_bound: ex.dropped,
            tail_bound: 0.0,
            n_balls: u.len(),
            n_pairs: ex.n_pairs,
        },
        rel_tol,
    )
}

/// `F_Ω(t) = |Ω| - H_Ω(t)` for the finite union `u`, assembled from
/// single-ball losses minus the exchanged heat.
pub fn heat_loss(u: &BallUnion, t: Time, rel_tol: f64) -> Result<ValueWithError> {
    check_rel_tol(rel_tol)?;
    let tt = t.get();
    let m = u.dim();
    let diag = diagonal(m, &radii(u), tt, UnitQuantity::Loss, table_budget(rel_tol))?;
    let content_scale = crate::geometry::total_measure(u);
    let ex = exchange(u, tt, rel_tol * diag.value.min(content_scale))?;
    let f = (diag - ex.value).with_extra_error(ex.dropped);
    if f.error_bound > rel_tol * f.value.abs() {
        return Err(Error::Numerical {
            message: format!("heat loss at t={tt} did not reach relative error {rel_tol:.3e}"),
            best: f,
        });
    }
    Ok(f)
}

/// `|H_Ω - Σ_i H_{B_i}| ≤ ω_m² e^{-δ²/(16t)} (2/δ + (4πt)^{-1/2})^m Σ_i r_i^{2m}`
/// for the infinite lattice whose head is `u`; the sum beyond the head is
/// bounded by an integral.
pub fn cross_term_bound(u: &BallUnion, t: Time) -> Result<f64> {
    if u.family() != Family::Lattice {
        return Err(Error::invalid("the decoupling bound applies to lattice unions only"));
    }
    let params = u.params().ok_or_else(|| Error::invalid("lattice union without parameters"))?;
    let delta = u.delta().expect("lattice");
    let m = u.dim();
    let tt = t.get();
    let p = 2.0 * m as f64 * params.alpha;
    let n = u.len() as f64;
    let head = neumaier_sum(u.balls().iter().rev().map(|b| b.radius.powi(2 * m as i32)));
    let tail = if p > 1.0 {
        params.a.powf(2.0 * m as f64) * n.powf(1.0 - p) / (p - 1.0)
    } else {
        f64::INFINITY
    };
    let omega = unit_ball_volume(m);
    let factor = (-delta * delta / (16.0 * tt)).exp() * (2.0 / delta + (4.0 * PI * tt).powf(-0.5)).powi(m as i32);
    Ok(omega * omega * factor * (head + tail))
}

/// How many lattice balls to treat individually.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeadSize {
    Auto,
    Fixed(usize),
}

const AUTO_HEAD_START: usize = 1024;
const AUTO_HEAD_MAX: usize = 1 << 21;

/// `Σ_{i>N} r_i^m Q_1(t/r_i²)` enclosed by `[∫_{N+1}^∞, ∫_N^∞]` of the
/// (decreasing) summand.
fn tail_diagonal(m: usize, profile: RadiusProfile, n: usize, t: f64, q: UnitQuantity, rel_budget: f64) -> Result<ValueWithError> {
    let from = |start: f64| -> Result<ValueWithError> {
        let (a, alpha) = (profile.a, profile.alpha);
        let r0 = a * start.powf(-alpha);
        let pre = a.powf(1.0 / alpha) / alpha;
        let expo = m as f64 - 1.0 / alpha;
        // r = r0 e^{-x}: Σ → pre ∫_0^∞ r^{m - 1/α} Q_1(t/r²) dx
        let err = std::cell::Cell::new(0.0f64);
        let f = |x: f64| {
            let r = r0 * (-x).exp();
            let tau = t / (r * r);
            match unit_value(m, q, tau, rel_budget) {
                Ok(v) => {
                    err.set(err.get().max(v.error_bound / v.value.max(f64::MIN_POSITIVE)));
                    r.powf(expo) * v.value
                }
                Err(_) => f64::NAN,
            }
        };
        let spec = QuadratureSpec::with_tolerances(rel_budget.max(1e-11), 0.0);
        let v = integrate_semi_infinite(f, 0.0, Endpoint::Regular, &spec)?;
        if !v.value.is_finite() {
            return Err(Error::Numerical {
                message: "tail integral evaluation failed".into(),
                best: v,
            });
        }
        let v = v.scale(pre);
        Ok(v.with_extra_error(err.get() * v.value))
    };
    let hi = from(n as f64)?;
    let lo = from(n as f64 + 1.0)?;
    Ok(ValueWithError::from_interval(lo.lower(), hi.upper()))
}

/// Bound on heat exchanged over ordered pairs with at least one ball
/// beyond the head.
fn tail_exchange_bound(m: usize, profile: RadiusProfile, head: &[Vec<i64>], next_norm: f64, t: f64) -> f64 {
    let n = head.len();
    let (a, alpha) = (profile.a, profile.alpha);
    let r_next = profile.radius(n + 1);
    // Separation rate: gap ≥ δ_N |z_i - z_j| whenever one ball is in the tail.
    let delta_n = 1.0 - a - r_next;
    let q = delta_n * delta_n / (4.0 * t);
    let omega = unit_ball_volume(m);
    let p = (4.0 * PI * t).powf(-0.5 * m as f64);
    let expo = 2.0 * m as f64 * alpha;
    let tail_r2m = a.powf(2.0 * m as f64) * (n as f64).powf(1.0 - expo) / (expo - 1.0);
    let tail_part = tail_r2m * lattice_gauss_sum(m, q);
    let head_part = neumaier_sum(head.iter().enumerate().map(|(i, z)| {
        let norm = (z.iter().map(|c| (c * c) as f64).sum::<f64>()).sqrt();
        let reach = (next_norm - norm).max(1.0);
        profile.radius(i + 1).powf(2.0 * m as f64) * lattice_gauss_sum_beyond(m, q, reach)
    }));
    omega * omega * p * (tail_part + head_part)
}

struct LatticeParts {
    head: BallUnion,
    head_diag: ValueWithError,
    tail_diag: ValueWithError,
    exchange: Exchange,
    tail_exchange: f64,
}

fn lattice_parts(
    m: usize,
    profile: RadiusProfile,
    t: f64,
    rel_tol: f64,
    head: HeadSize,
    q: UnitQuantity,
) -> Result<LatticeParts> {
    let rb = table_budget(rel_tol);
    // A lower bound on the quantity fixes the absolute budget.
    let probe_n = AUTO_HEAD_START.min(match head {
        HeadSize::Fixed(n) => n,
        HeadSize::Auto => AUTO_HEAD_START,
    });
    let probe_r: Vec<f64> = (1..=probe_n).map(|i| profile.radius(i)).collect();
    let scale = diagonal(m, &probe_r, t, q, rb)?.lower();
    let budget = rel_tol * scale;
    let n = match head {
        HeadSize::Fixed(n) if n >= 1 => n,
        HeadSize::Fixed(_) => return Err(Error::invalid("lattice head needs at least one ball")),
        HeadSize::Auto => {
            let mut n = AUTO_HEAD_START;
            loop {
                // The tail enclosure is about one summand wide.
                let r = profile.radius(n);
                let width = r.powi(m as i32) * unit_value(m, q, t / (r * r), rb)?.upper();
                if width <= 0.2 * budget || n >= AUTO_HEAD_MAX {
                    break n;
                }
                n *= 2;
            }
        }
    };
    let pts = lattice_points(m, n + 1);
    let next_norm = pts[n].iter().map(|c| (c * c) as f64).sum::<f64>().sqrt();
    let head_union = crate::geometry::make_lattice_config(m, profile.a, profile.alpha, n)?;
    let head_diag = diagonal(m, &radii(&head_union), t, q, rb)?;
    let tail_diag = tail_diagonal(m, profile, n, t, q, rb)?;
    let exchange = exchange(&head_union, t, budget)?;
    let tail_exchange = tail_exchange_bound(m, profile, &pts[..n], next_norm, t);
    Ok(LatticeParts {
        head: head_union,
        head_diag,
        tail_diag,
        exchange,
        tail_exchange,
    })
}

fn check_lattice_profile(m: usize, profile: RadiusProfile) -> Result<()> {
    if m == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    if !(profile.a < 0.5) {
        return Err(Error::invalid("lattice needs a < 1/2"));
    }
    Ok(())
}

/// `H_Ω(t)` for the infinite lattice union with radii `a i^{-α}`: the
/// first `N` balls explicitly, the rest through rigorous enclosures.
pub fn lattice_heat_content(m: usize, profile: RadiusProfile, t: Time, rel_tol: f64, head: HeadSize) -> Result<HeatContentResult> {
    check_rel_tol(rel_tol)?;
    check_lattice_profile(m, profile)?;
    if !(2.0 * m as f64 * profile.alpha > 1.0) {
        return Err(Error::invalid(format!(
            "lattice heat content is infinite for 2 m alpha = {} <= 1",
            2.0 * m as f64 * profile.alpha
        )));
    }
    let tt = t.get();
    let parts = lattice_parts(m, profile, tt, rel_tol, head, UnitQuantity::Content)?;
    let diag = parts.head_diag + parts.tail_diag;
    let dropped = parts.exchange.dropped + parts.tail_exchange;
    let lo = diag.lower() + parts.exchange.value.lower();
    let hi = diag.upper() + parts.exchange.value.upper() + dropped;
    let h = ValueWithError::from_interval(lo, hi);
    finish(
        HeatContentResult {
            t: tt,
            h,
            diag: diag.value,
            cross: parts.exchange.value.value,
            dropped_cross_bound: parts.exchange.dropped,
            tail_bound: parts.tail_diag.error_bound + parts.tail_exchange,
            n_balls: parts.head.len(),
            n_pairs: parts.exchange.n_pairs,
        },
        rel_tol,
    )
}

/// `F_Ω(t)` for the infinite lattice union; requires finite measure (`mα > 1`).
pub fn lattice_heat_loss(m: usize, profile: RadiusProfile, t: Time, rel_tol: f64, head: HeadSize) -> Result<ValueWithError> {
    check_rel_tol(rel_tol)?;
    check_lattice_profile(m, profile)?;
    if !(m as f64 * profile.alpha > 1.0) {
        return Err(Error::invalid(format!(
            "heat loss needs finite measure, but m alpha = {} <= 1",
            m as f64 * profile.alpha
        )));
    }
    let tt = t.get();
    let parts = lattice_parts(m, profile, tt, rel_tol, head, UnitQuantity::Loss)?;
    let diag = parts.head_diag + parts.tail_diag;
    let dropped = parts.exchange.dropped + parts.tail_exchange;
    let lo = diag.lower() - parts.exchange.value.upper() - dropped;
    let hi = diag.upper() - parts.exchange.value.lower();
    let f = ValueWithError::from_interval(lo, hi);
    if f.error_bound > rel_tol * f.value.abs() {
        return Err(Error::Numerical {
            message: format!("lattice heat loss at t={tt} did not reach relative error {rel_tol:.3e}"),
            best: f,
        });
    }
    Ok(f)
}

/// Measure of the infinite lattice union, `ω_m a^m ζ(mα)`, enclosed via
/// a head sum and integral tail bounds.
pub fn lattice_measure(m: usize, profile: RadiusProfile, n_head: usize) -> Result<ValueWithError> {
    let p = m as f64 * profile.alpha;
    if !(p > 1.0) {
        return Err(Error::invalid("lattice measure is infinite for m alpha <= 1"));
    }
    let am = profile.a.powi(m as i32);
    let head = am * neumaier_sum((1..=n_head).rev().map(|i| (i as f64).powf(-p)));
    let nf = n_head as f64;
    let lo = head + am * (nf + 1.0).powf(1.0 - p) / (p - 1.0);
    let hi = head + am * nf.powf(1.0 - p) / (p - 1.0);
    let omega = unit_ball_volume(m);
    Ok(ValueWithError::from_interval(omega * lo, omega * hi).with_extra_error(1e-15 * omega * hi))
}

/// A union to evaluate: a finite list of balls, or the infinite lattice
/// family truncated adaptively.
#[derive(Debug, Clone, PartialEq)]
pub enum Configuration {
    Finite(BallUnion),
    Lattice {
        m: usize,
        profile: RadiusProfile,
        head: HeadSize,
    },
}

/// Head size used to enclose the measure of an infinite lattice.
const MEASURE_HEAD: usize = 1 << 20;

impl Configuration {
    pub fn dim(&self) -> usize {
        match self {
            Configuration::Finite(u) => u.dim(),
            Configuration::Lattice { m, .. } => *m,
        }
    }

    pub fn heat_content(&self, t: Time, rel_tol: f64) -> Result<HeatContentResult> {
        match self {
            Configuration::Finite(u) => heat_content(u, t, rel_tol),
            Configuration::Lattice { m, profile, head } => lattice_heat_content(*m, *profile, t, rel_tol, *head),
        }
    }

    pub fn heat_loss(&self, t: Time, rel_tol: f64) -> Result<ValueWithError> {
        match self {
            Configuration::Finite(u) => heat_loss(u, t, rel_tol),
            Configuration::Lattice { m, profile, head } => lattice_heat_loss(*m, *profile, t, rel_tol, *head),
        }
    }

    pub fn has_finite_measure(&self) -> bool {
        match self {
            Configuration::Finite(_) => true,
            Configuration::Lattice { m, profile, .. } => *m as f64 * profile.alpha > 1.0,
        }
    }

    pub fn measure(&self) -> Result<ValueWithError> {
        match self {
            Configuration::Finite(u) => {
                let v = crate::geometry::total_measure(u);
                Ok(ValueWithError::new(v, 4.0 * f64::EPSILON * v))
            }
            Configuration::Lattice { m, profile, .. } => lattice_measure(*m, *profile, MEASURE_HEAD),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_chain_config, make_lattice_config, total_measure, Ball};
    use crate::kernel::{ball_heat_content, cross_heat_content};

    fn t(v: f64) -> Time {
        Time::new(v).unwrap()
    }

    #[test]
    fn theta_sums() {
        // θ(q) - 1 for moderate q against a long direct sum.
        for &q in &[0.05, 0.7, 3.0, 40.0] {
            let direct: f64 = 2.0 * (1..2000).map(|k| (-q * (k * k) as f64).exp()).sum::<f64>();
            assert!((theta_minus_one(q) - direct).abs() <= 1e-14 * direct.max(1e-300));
        }
        // m = 2 lattice sum against explicit enumeration.
        let q = 0.8;
        let mut s = 0.0;
        for i in -40i32..=40 {
            for j in -40i32..=40 {
                if i != 0 || j != 0 {
                    s += (-q * (i * i + j * j) as f64).exp();
                }
            }
        }
        assert!((lattice_gauss_sum(2, q) - s).abs() < 1e-13);
        let mut beyond = 0.0;
        for i in -40i32..=40 {
            for j in -40i32..=40 {
                if i * i + j * j >= 9 {
                    beyond += (-q * (i * i + j * j) as f64).exp();
                }
            }
        }
        let bound = lattice_gauss_sum_beyond(2, q, 3.0);
        assert!(bound >= beyond && bound < s);
    }

    #[test]
    fn single_ball_union_equals_ball_content() {
        let u = BallUnion::new(2, vec![Ball::new(vec![0.0, 0.0], 0.7).unwrap()], Family::Custom, None).unwrap();
        let r = heat_content(&u, t(0.01), 1e-9).unwrap();
        let b = ball_heat_content(2, 0.7, t(0.01)).unwrap();
        assert!((r.h.value - b.value).abs() <= r.h.error_bound + b.error_bound);
        assert_eq!(r.cross, 0.0);
        assert!(union_temperature(&u, &[0.1, 0.0], t(0.01)) == ball_temperature(2, &[0.0, 0.0], 0.7, &[0.1, 0.0], t(0.01)));
    }

    #[test]
    fn two_ball_union_adds_both_directions_of_exchange() {
        let balls = vec![Ball::new(vec![0.0, 0.0, 0.0], 0.4).unwrap(), Ball::new(vec![0.9, 0.0, 0.0], 0.3).unwrap()];
        let u = BallUnion::new(3, balls, Family::Custom, None).unwrap();
        let tt = 0.02;
        let r = heat_content(&u, t(tt), 1e-9).unwrap();
        let c = cross_heat_content(3, 0.4, 0.3, 0.9, t(tt)).unwrap();
        let want = ball_heat_content(3, 0.4, t(tt)).unwrap().value + ball_heat_content(3, 0.3, t(tt)).unwrap().value + 2.0 * c.value;
        assert!((r.h.value - want).abs() <= r.h.error_bound + 1e-12, "{} vs {want}", r.h);
    }

    #[test]
    fn far_separated_temperature_contribution_is_gaussian_small() {
        let balls = vec![Ball::new(vec![0.0, 0.0], 0.3).unwrap(), Ball::new(vec![2.0, 0.0], 0.2).unwrap()];
        let u = BallUnion::new(2, balls, Family::Custom, None).unwrap();
        let tt = 0.01;
        let x = [0.1, 0.0];
        let own = ball_temperature(2, &[0.0, 0.0], 0.3, &x, t(tt));
        let other = union_temperature(&u, &x, t(tt)) - own;
        let gap: f64 = 2.0 - 0.2 - 0.1;
        let bound = (-gap * gap / (4.0 * tt)).exp() * PI * 0.04 / (4.0 * PI * tt);
        assert!(other <= bound + 1e-300);
    }

    #[test]
    fn loss_and_content_are_complementary_for_finite_unions() {
        for u in [make_chain_config(2, 0.25, 0.42, 60).unwrap(), make_lattice_config(2, 0.25, 0.75, 40).unwrap()] {
            for &tt in &[1e-5, 1e-3, 0.05] {
                let h = heat_content(&u, t(tt), 1e-8).unwrap().h;
                let f = heat_loss(&u, t(tt), 1e-6).unwrap();
                let measure = total_measure(&u);
                assert!((h.value + f.value - measure).abs() <= h.error_bound + f.error_bound + 1e-14 * measure, "t={tt}: {h} + {f} vs {measure}");
            }
        }
    }

    #[test]
    fn lattice_cross_term_is_below_the_decoupling_bound() {
        let u = make_lattice_config(2, 0.25, 0.4, 400).unwrap();
        let r = heat_content(&u, t(1e-4), 1e-8).unwrap();
        let bound = cross_term_bound(&u, t(1e-4)).unwrap();
        assert!(bound < 1e-60);
        assert!(r.cross + r.dropped_cross_bound <= bound);
    }

    #[test]
    fn decoupling_bound_vanishes_as_time_shrinks() {
        let u = make_lattice_config(2, 0.25, 0.75, 200).unwrap();
        let mut prev = 0.0;
        for k in 0..12 {
            let tt = 1e-4 * 1.6f64.powi(k);
            let b = cross_term_bound(&u, t(tt)).unwrap();
            assert!(b >= prev);
            prev = b;
        }
        assert!(cross_term_bound(&u, t(1e-6)).unwrap() == 0.0);
        assert!(cross_term_bound(&make_chain_config(2, 0.25, 0.42, 5).unwrap(), t(0.1)).is_err());
    }

    #[test]
    fn lattice_head_and_tail_agree_with_a_larger_explicit_head() {
        let profile = RadiusProfile::new(0.25, 0.75).unwrap();
        let tt = 1e-3;
        let small = lattice_heat_content(2, profile, t(tt), 1e-4, HeadSize::Fixed(2000)).unwrap();
        let large = lattice_heat_content(2, profile, t(tt), 1e-6, HeadSize::Fixed(64000)).unwrap();
        assert!((small.h.value - large.h.value).abs() <= small.h.error_bound + large.h.error_bound);
        assert!(large.h.error_bound < small.h.error_bound);
    }

    #[test]
    fn lattice_loss_matches_measure_minus_content() {
        let profile = RadiusProfile::new(0.25, 0.75).unwrap();
        let tt = 1e-5;
        let h = lattice_heat_content(2, profile, t(tt), 1e-6, HeadSize::Auto).unwrap().h;
        let f = lattice_heat_loss(2, profile, t(tt), 1e-4, HeadSize::Auto).unwrap();
        let measure = lattice_measure(2, profile, 1 << 20).unwrap();
        let gap = (h.value + f.value - measure.value).abs();
        assert!(gap <= h.error_bound + f.error_bound + measure.error_bound, "{h} + {f} vs {measure}");
        assert!(lattice_heat_loss(2, RadiusProfile::new(0.25, 0.4).unwrap(), t(tt), 1e-4, HeadSize::Auto).is_err());
    }
}
