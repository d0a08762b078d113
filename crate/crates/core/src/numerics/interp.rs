//! Log-log memo tables with built-in interpolation error estimates.

use rayon::prelude::*;

use super::ValueWithError;
use crate::error::Result;

const STENCIL: usize = 6;
// Interpolation error estimates are multiplied by this before use.
const SAFETY: f64 = 4.0;

/// `ln f` tabulated against `ln x` on a uniform grid in `log10 x`, read
/// back with six-point Lagrange interpolation.
///
/// The error of each interval is estimated at build time by interpolating
/// the odd nodes from the even ones: halving the spacing shrinks the error
/// of a six-point rule by about `2^6`. The estimate is not a proof; where
/// the function has a kink the estimate grows and callers fall back to
/// direct evaluation.
#[derive(Debug, Clone)]
pub struct LogLogTable {
    log10_min: f64,
    per_decade: f64,
    ln_values: Vec<f64>,
    node_rel_err: Vec<f64>,
    interval_rel_err: Vec<f64>,
}

impl LogLogTable {
    /// Tabulates a positive function on `[10^log10_min, 10^log10_max]`.
    pub fn build<F>(log10_min: f64, log10_max: f64, per_decade: usize, f: F) -> Result<Self>
    where
        F: Fn(f64) -> Result<ValueWithError> + Sync,
    {
        let per_decade_f = per_decade as f64;
        let n = ((log10_max - log10_min) * per_decade_f).ceil() as usize + 1;
        assert!(n >= 2 * STENCIL, "table too short");
        let nodes: Vec<Result<ValueWithError>> = (0..n)
            .into_par_iter()
            .map(|k| f(10f64.powf(log10_min + k as f64 / per_decade_f)))
            .collect();
        let mut vals = Vec::with_capacity(n);
        for v in nodes {
            vals.push(v?);
        }
        let ln_values: Vec<f64> = vals.iter().map(|v| v.value.ln()).collect();
        let node_rel_err: Vec<f64> = vals.iter().map(|v| v.error_bound / v.value).collect();

        // Errors of the rules with twice and four times the spacing.
        let e2 = coarse_errors(&ln_values, 2);
        let e4 = coarse_errors(&ln_values, 4);
        let interval_rel_err = (0..n - 1)
            .map(|k| {
                let w2 = window_max(&e2, k, 4);
                let w4 = window_max(&e4, k, 8);
                // Only trust the 2^6 gain where the coarser levels show it.
                let smooth = w4 >= 32.0 * w2 || w4 < 1e-14;
                if smooth {
                    SAFETY * w2 / 64.0
                } else {
                    SAFETY * w2.max(w4)
                }
            })
            .collect();
        Ok(Self {
            log10_min,
            per_decade: per_decade_f,
            ln_values,
            node_rel_err,
            interval_rel_err,
        })
    }

    /// Interpolated value and its estimated relative error, or `None`
    /// outside the tabulated range.
    pub fn lookup(&self, x: f64) -> Option<(f64, f64)> {
        let s = (x.log10() - self.log10_min) * self.per_decade;
        let last = self.ln_values.len() - 1;
        if !(s >= 0.0 && s <= last as f64) {
            return None;
        }
        let k = (s.floor() as usize).min(last - 1);
        let start = stencil_start(s, last + 1);
        let ln_v = lagrange(&self.ln_values[start..start + STENCIL], s - start as f64);
        let node_err = self.node_rel_err[start..start + STENCIL].iter().cloned().fold(0.0, f64::max);
        // The Lebesgue constant of six equispaced nodes is below 3.
        let rel = self.interval_rel_err[k] + 3.0 * node_err + 1e-15 * (1.0 + ln_v.abs());
        Some((ln_v.exp(), rel.exp_m1()))
    }
}

/// Interpolation errors at nodes skipped by the sub-grid of every
/// `stride`-th node.
fn coarse_errors(ln_values: &[f64], stride: usize) -> Vec<f64> {
    let n = ln_values.len();
    let coarse: Vec<f64> = ln_values.iter().step_by(stride).cloned().collect();
    let nc = coarse.len();
    let mut err = vec![0.0; n];
    if nc < STENCIL {
        return err;
    }
    for (o, e) in err.iter_mut().enumerate() {
        if o % stride == 0 {
            continue;
        }
        let pos = o as f64 / stride as f64;
        let start = stencil_start(pos, nc);
        let p = lagrange(&coarse[start..start + STENCIL], pos - start as f64);
        let d = (p - ln_values[o]).abs();
        *e = if d.is_finite() { d } else { f64::INFINITY };
    }
    err
}

fn window_max(v: &[f64], k: usize, half: usize) -> f64 {
    let lo = k.saturating_sub(half);
    let hi = (k + half + 1).min(v.len() - 1);
    v[lo..=hi].iter().cloned().fold(0.0, f64::max)
}

fn stencil_start(pos: f64, n: usize) -> usize {
    let k = pos.floor() as isize;
    (k - 2).clamp(0, (n - STENCIL) as isize) as usize
}

/// Lagrange interpolation through `(i, ys[i])`, evaluated at `x`.
fn lagrange(ys: &[f64], x: f64) -> f64 {
    let n = ys.len();
    let mut acc = 0.0;
    for (i, &y) in ys.iter().enumerate() {
        let mut w = 1.0;
        for j in (0..n).filter(|&j| j != i) {
            w *= (x - j as f64) / (i as f64 - j as f64);
        }
        acc += w * y;
    }
    acc
}
