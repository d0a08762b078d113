//! Unit-ball heat content `H_1(τ)` and heat loss `F_1(τ)`.
//!
//! Direct evaluation uses `ρ = 2√τ v`, which turns both into Gaussian
//! moments of the lens volume (content) or its complement (loss). The two
//! quantities are computed from different integrands, so `H_1 + F_1 = ω_m`
//! is a genuine consistency check.
//!
//! Bulk sums go through log-log memo tables of both.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::Result;
use crate::geometry::{deficit_volume, overlap_volume, unit_ball_volume, unit_sphere_area};
use crate::numerics::{gamma_q, integrate, Endpoint, LogLogTable, QuadratureSpec, ValueWithError};

// Gaussian weight beyond v = V_CUT is charged rather than integrated.
const V_CUT: f64 = 10.0;

fn node_spec() -> QuadratureSpec {
    QuadratureSpec {
        rel_tol: 1e-13,
        abs_tol: 0.0,
        max_subdivisions: 4000,
    }
}

fn prefactor(m: usize) -> f64 {
    unit_sphere_area(m) * PI.powf(-0.5 * m as f64)
}

/// `H_1(τ)` by direct quadrature.
pub fn unit_content_direct(m: usize, tau: f64, spec: &QuadratureSpec) -> Result<ValueWithError> {
    let s = tau.sqrt();
    let v_end = 1.0 / s;
    let mi = m as i32;
    let f = |v: f64| (-v * v).exp() * v.powi(mi - 1) * overlap_volume(m, 1.0, 1.0, 2.0 * s * v);
    let omega = unit_ball_volume(m);
    let pre = prefactor(m);
    if v_end <= V_CUT {
        let right = Endpoint::Power(0.5 * (m as f64 + 1.0));
        let v = integrate(f, 0.0, v_end, Endpoint::Regular, right, spec)?;
        Ok(v.scale(pre))
    } else {
        let v = integrate(f, 0.0, V_CUT, Endpoint::Regular, Endpoint::Regular, spec)?;
        // Beyond V_CUT the lens is at most the full ball.
        let tail = omega * gamma_q(0.5 * m as f64, V_CUT * V_CUT);
        Ok(v.scale(pre).with_extra_error(tail))
    }
}

/// `F_1(τ) = ω_m - H_1(τ)` by direct quadrature of the deficit.
pub fn unit_loss_direct(m: usize, tau: f64, spec: &QuadratureSpec) -> Result<ValueWithError> {
    let s = tau.sqrt();
    let v_end = 1.0 / s;
    let mi = m as i32;
    let f = |v: f64| (-v * v).exp() * v.powi(mi - 1) * deficit_volume(m, 1.0, 1.0, 2.0 * s * v);
    let omega = unit_ball_volume(m);
    let pre = prefactor(m);
    if v_end <= V_CUT {
        let right = Endpoint::Power(0.5 * (m as f64 + 1.0));
        let v = integrate(f, 0.0, v_end, Endpoint::Regular, right, spec)?;
        // For v ≥ 1/√τ the deficit is the whole ball.
        let rest = omega * gamma_q(0.5 * m as f64, v_end * v_end);
        Ok(v.scale(pre) + ValueWithError::new(rest, 4.0 * f64::EPSILON * rest))
    } else {
        let v = integrate(f, 0.0, V_CUT, Endpoint::Regular, Endpoint::Regular, spec)?;
        let tail = omega * gamma_q(0.5 * m as f64, V_CUT * V_CUT);
        Ok(v.scale(pre).with_extra_error(tail))
    }
}

/// Which of the two tabulated functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnitQuantity {
    Content,
    Loss,
}

pub const TABLE_LOG10_MIN: f64 = -12.0;
pub const TABLE_LOG10_MAX: f64 = 6.0;
pub const NODES_PER_DECADE: usize = 64;

/// Memo table of `H_1` and `F_1` for one dimension.
#[derive(Debug)]
pub struct UnitBallTable {
    m: usize,
    content: LogLogTable,
    loss: LogLogTable,
}

impl UnitBallTable {
    fn build(m: usize) -> Result<Self> {
        let spec = node_spec();
        let content = LogLogTable::build(TABLE_LOG10_MIN, TABLE_LOG10_MAX, NODES_PER_DECADE, |tau| {
            unit_content_direct(m, tau, &spec)
        })?;
        let loss = LogLogTable::build(TABLE_LOG10_MIN, TABLE_LOG10_MAX, NODES_PER_DECADE, |tau| {
            unit_loss_direct(m, tau, &spec)
        })?;
        Ok(Self { m, content, loss })
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    /// Interpolated value with its estimated relative error, or `None`
    /// outside the tabulated range.
    pub fn lookup(&self, q: UnitQuantity, tau: f64) -> Option<(f64, f64)> {
        match q {
            UnitQuantity::Content => self.content.lookup(tau),
            UnitQuantity::Loss => self.loss.lookup(tau),
        }
    }
}

static TABLES: OnceLock<Mutex<HashMap<usize, Arc<UnitBallTable>>>> = OnceLock::new();

/// Shared table for dimension `m`, built on first use.
pub fn unit_ball_table(m: usize) -> Result<Arc<UnitBallTable>> {
    let map = TABLES.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = map.lock().unwrap_or_else(|e| e.into_inner());
    if let Some(t) = guard.get(&m) {
        return Ok(Arc::clone(t));
    }
    let table = Arc::new(UnitBallTable::build(m)?);
    guard.insert(m, Arc::clone(&table));
    Ok(table)
}

/// Large-`τ` enclosure of `H_1` from `1 - s ≤ e^{-s} ≤ 1 - s + s²/2`
/// with `s = |x-y|²/(4τ)`, `E|x-y|² = 2m/(m+2)` and `|x-y|⁴ ≤ 16`.
fn content_large_tau(m: usize, tau: f64) -> ValueWithError {
    let omega = unit_ball_volume(m);
    let base = (4.0 * PI * tau).powf(-0.5 * m as f64) * omega * omega;
    let mean_s = 2.0 * m as f64 / (m as f64 + 2.0) / (4.0 * tau);
    let width = 0.5 / (tau * tau);
    ValueWithError::from_interval(base * (1.0 - mean_s), base * (1.0 - mean_s + width))
}

/// `H_1(τ)` or `F_1(τ)`, from the memo table when its estimated error fits
/// within `rel_budget`, otherwise by direct quadrature.
pub fn unit_value(m: usize, q: UnitQuantity, tau: f64, rel_budget: f64) -> Result<ValueWithError> {
    if tau > 10f64.powf(TABLE_LOG10_MAX) {
        let h = content_large_tau(m, tau);
        return Ok(match q {
            UnitQuantity::Content => h,
            UnitQuantity::Loss => {
                let omega = unit_ball_volume(m);
                ValueWithError::new(omega - h.value, h.error_bound + 2.0 * f64::EPSILON * omega)
            }
        });
    }
    let table = unit_ball_table(m)?;
    if let Some((v, rel)) = table.lookup(q, tau) {
        if rel <= rel_budget {
            return Ok(ValueWithError::new(v, rel * v));
        }
    }
    let spec = QuadratureSpec::with_tolerances(rel_budget.clamp(1e-13, 1e-6), 0.0);
    match q {
        UnitQuantity::Content => unit_content_direct(m, tau, &spec),
        UnitQuantity::Loss => unit_loss_direct(m, tau, &spec),
    }
}
