//! Globally adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! The per-panel error estimate is `|K15 - G7|` plus a rounding floor, which
//! overestimates the true error of the Kronrod result for smooth integrands.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::ValueWithError;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_subdivisions: 2000,
        }
    }
}

impl QuadratureSpec {
    pub fn with_tolerances(rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol,
            ..Self::default()
        }
    }
}

/// Behaviour of the integrand near an endpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Endpoint {
    Regular,
    /// Integrand behaves like `|x - endpoint|^p` with `p > -1`.
    Power(f64),
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, b: f64) -> Panel {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    let mut kabs = fc.abs() * WGK[7];
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        k += WGK[j] * (f1 + f2);
        kabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            g += WG[j / 2] * (f1 + f2);
        }
    }
    let value = k * h;
    let err = ((k - g) * h).abs() + 50.0 * f64::EPSILON * (kabs * h).abs();
    Panel {
        a,
        b,
        value,
        error: err,
    }
}

/// Integrate `f` over the finite interval `[a, b]`.
///
/// Endpoint power singularities are removed by the substitution
/// `x = a + (b-a) u^κ` (and its mirror image), `κ = 2/(1+p)`.
pub fn integrate<F>(f: F, a: f64, b: f64, left: Endpoint, right: Endpoint, spec: &QuadratureSpec) -> Result<ValueWithError>
where
    F: Fn(f64) -> f64,
{
    integrate_dyn(&f, a, b, left, right, spec)
}

fn integrate_dyn(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    left: Endpoint,
    right: Endpoint,
    spec: &QuadratureSpec,
) -> Result<ValueWithError> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::invalid(format!("integrate: non-finite limits [{a}, {b}]")));
    }
    if a == b {
        return Ok(ValueWithError::ZERO);
    }
    if a > b {
        return integrate_dyn(f, b, a, right, left, spec).map(|v| -v);
    }
    match (left, right) {
        (Endpoint::Regular, Endpoint::Regular) => adaptive(f, a, b, spec),
        (Endpoint::Power(p), Endpoint::Regular) => {
            let kappa = power_exponent(p)?;
            let len = b - a;
            let g = |u: f64| {
                if u <= 0.0 {
                    return 0.0;
                }
                let x = a + len * u.powf(kappa);
                f(x) * len * kappa * u.powf(kappa - 1.0)
            };
            adaptive(&g, 0.0, 1.0, spec)
        }
        (Endpoint::Regular, Endpoint::Power(p)) => {
            let kappa = power_exponent(p)?;
            let len = b - a;
            let g = |u: f64| {
                if u <= 0.0 {
                    return 0.0;
                }
                let x = b - len * u.powf(kappa);
                f(x) * len * kappa * u.powf(kappa - 1.0)
            };
            adaptive(&g, 0.0, 1.0, spec)
        }
        (l, r) => {
            let mid = 0.5 * (a + b);
            let half = QuadratureSpec {
                abs_tol: 0.5 * spec.abs_tol,
                ..*spec
            };
            let lo = integrate_dyn(f, a, mid, l, Endpoint::Regular, &half)?;
            let hi = integrate_dyn(f, mid, b, Endpoint::Regular, r, &half)?;
            Ok(lo + hi)
        }
    }
}

fn power_exponent(p: f64) -> Result<f64> {
    if p <= -1.0 {
        return Err(Error::invalid(format!("endpoint exponent {p} is not integrable")));
    }
    Ok((2.0 / (1.0 + p)).max(1.0))
}

/// Integrate `f` over `[a, ∞)` via `x = a + u/(1-u)`.
pub fn integrate_semi_infinite<F>(f: F, a: f64, left: Endpoint, spec: &QuadratureSpec) -> Result<ValueWithError>
where
    F: Fn(f64) -> f64,
{
    let g = |u: f64| {
        if u >= 1.0 {
            return 0.0;
        }
        let one_minus = 1.0 - u;
        let x = a + u / one_minus;
        let v = f(x) / (one_minus * one_minus);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate(g, 0.0, 1.0, left, Endpoint::Regular, spec)
}

fn adaptive<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<ValueWithError> {
    let first = gk15(f, a, b);
    let mut heap = BinaryHeap::new();
    let mut total = first.value;
    let mut total_err = first.error;
    heap.push(first);
    let mut n = 1;
    loop {
        let tol = spec.abs_tol.max(spec.rel_tol * total.abs());
        if total_err <= tol {
            break;
        }
        if n >= spec.max_subdivisions {
            let best = resum(&heap);
            return Err(Error::Numerical {
                message: format!(
                    "quadrature budget of {} panels exhausted on [{a}, {b}]",
                    spec.max_subdivisions
                ),
                best,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Panel cannot be split further in floating point.
            heap.push(Panel {
                error: worst.error,
                ..worst
            });
            let best = resum(&heap);
            return Err(Error::Numerical {
                message: "quadrature panel below floating-point resolution".into(),
                best,
            });
        }
        let l = gk15(f, worst.a, mid);
        let r = gk15(f, mid, worst.b);
        total += l.value + r.value - worst.value;
        total_err += l.error + r.error - worst.error;
        heap.push(l);
        heap.push(r);
        n += 1;
        if n % 64 == 0 {
            let v = resum(&heap);
            total = v.value;
            total_err = v.error_bound;
        }
    }
    Ok(resum(&heap))
}

fn resum(heap: &BinaryHeap<Panel>) -> ValueWithError {
    let mut panels: Vec<&Panel> = heap.iter().collect();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let value = super::neumaier_sum(panels.iter().map(|p| p.value));
    let err = super::neumaier_sum(panels.iter().map(|p| p.error));
    ValueWithError::new(value, err)
}
