//! Noncentral chi-square distribution via the Poisson mixture of central
//! chi-square laws, summed outward from the Poisson mode.

use super::special::{gamma_pq, poisson_density};

/// Both tails of a noncentral chi-square law, with a bound on the neglected
/// Poisson mass and accumulated rounding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareSplit {
    pub cdf: f64,
    pub sf: f64,
    pub error_bound: f64,
}

const TAIL_TOL: f64 = 1e-17;

/// `P(χ²_k(λ) ≤ q)` and `P(χ²_k(λ) > q)` together.
pub fn noncentral_chisq(k: f64, lambda: f64, q: f64) -> ChiSquareSplit {
    assert!(k > 0.0, "degrees of freedom must be positive");
    assert!(lambda >= 0.0, "noncentrality must be non-negative");
    if q <= 0.0 {
        return ChiSquareSplit { cdf: 0.0, sf: 1.0, error_bound: 0.0 };
    }
    if q.is_infinite() {
        return ChiSquareSplit { cdf: 1.0, sf: 0.0, error_bound: 0.0 };
    }
    let a0 = 0.5 * k;
    let x = 0.5 * q;
    let mu = 0.5 * lambda;
    if mu == 0.0 {
        let (p, s) = gamma_pq(a0, x);
        return ChiSquareSplit { cdf: p, sf: s, error_bound: 4.0 * f64::EPSILON };
    }

    let j0 = mu.floor();
    let w0 = poisson_density(j0, mu);
    let (p0, q0) = gamma_pq(a0 + j0, x);
    let d0 = poisson_density(a0 + j0, x);

    let mut cdf = w0 * p0;
    let mut sf = w0 * q0;
    let mut comp_cdf = 0.0;
    let mut comp_sf = 0.0;
    let mut n_terms = 1usize;
    let mut neglected = 0.0;

    // upward: j = j0+1, j0+2, ...
    {
        let (mut w, mut p, mut s, mut d) = (w0, p0, q0, d0);
        let mut j = j0;
        loop {
            let a = a0 + j;
            p = (p - d).max(0.0);
            s = (s + d).min(1.0);
            d *= x / (a + 1.0);
            w *= mu / (j + 1.0);
            j += 1.0;
            kahan(&mut cdf, &mut comp_cdf, w * p);
            kahan(&mut sf, &mut comp_sf, w * s);
            n_terms += 1;
            let rho = mu / (j + 1.0);
            if rho < 1.0 {
                let tail = w * rho / (1.0 - rho);
                if tail < TAIL_TOL || w == 0.0 {
                    neglected += tail;
                    break;
                }
            }
        }
    }
    // downward: j = j0-1, ..., 0
    {
        let (mut w, mut p, mut s, mut d) = (w0, p0, q0, d0);
        let mut j = j0;
        while j >= 1.0 {
            let a = a0 + j;
            // d(a-1) = d(a) * a / x
            d *= a / x;
            if !d.is_finite() {
                d = poisson_density(a - 1.0, x);
            }
            p = (p + d).min(1.0);
            s = (s - d).max(0.0);
            w *= j / mu;
            j -= 1.0;
            kahan(&mut cdf, &mut comp_cdf, w * p);
            kahan(&mut sf, &mut comp_sf, w * s);
            n_terms += 1;
            if j >= 1.0 {
                let rho = j / mu;
                let tail = w * rho / (1.0 - rho);
                if rho < 1.0 && tail < TAIL_TOL {
                    neglected += tail;
                    break;
                }
            }
        }
    }
    let cdf = (cdf + comp_cdf).clamp(0.0, 1.0);
    let sf = (sf + comp_sf).clamp(0.0, 1.0);
    let rounding = 8.0 * f64::EPSILON * (n_terms as f64).sqrt();
    ChiSquareSplit {
        cdf,
        sf,
        error_bound: neglected + rounding,
    }
}

/// `P(χ²_k(λ) ≤ q)`.
pub fn noncentral_chisq_cdf(k: f64, lambda: f64, q: f64) -> f64 {
    noncentral_chisq(k, lambda, q).cdf
}

/// `P(χ²_k(λ) > q)`.
pub fn noncentral_chisq_sf(k: f64, lambda: f64, q: f64) -> f64 {
    noncentral_chisq(k, lambda, q).sf
}

#[inline]
fn kahan(sum: &mut f64, comp: &mut f64, x: f64) {
    let t = *sum + x;
    if sum.abs() >= x.abs() {
        *comp += (*sum - t) + x;
    } else {
        *comp += (x - t) + *sum;
    }
    *sum = t;
}
