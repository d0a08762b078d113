//! Two-ball integrals `∫_{B1}∫_{B2} k(x - y) dy dx` for radial kernels.
//!
//! Substituting `w = x - y` turns the double integral into
//! `∫ k(w) |B1 ∩ (B2 + w)| dw`; the intersection volume depends only on
//! `|w - (c2 - c1)|`, so polar coordinates around the offset leave a single
//! radial integral of the lens volume against the spherical average of `k`.

use crate::error::Result;
use crate::geometry::{overlap_volume, unit_sphere_area};
use crate::numerics::{gamma_fn, integrate, Endpoint, QuadratureSpec, ValueWithError};

/// Mean of `e^{z(cos θ - 1)}` over the unit sphere `S^{m-1}`, where `θ` is
/// the angle to a fixed axis. Equals `Γ(ν+1)(2/z)^ν e^{-z} I_ν(z)` with
/// `ν = m/2 - 1`.
pub fn sphere_exp_average(m: usize, z: f64) -> f64 {
    debug_assert!(z >= 0.0);
    let nu = 0.5 * m as f64 - 1.0;
    if z <= 40.0 {
        // Ascending series: all terms positive.
        let q = 0.25 * z * z;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 0.0;
        loop {
            term *= q / ((k + 1.0) * (nu + k + 1.0));
            sum += term;
            k += 1.0;
            if term < 1e-17 * sum {
                break;
            }
        }
        return (-z).exp() * sum;
    }
    // Large argument: Hankel expansion of e^{-z} I_ν(z). The first neglected
    // term is below 1e-17 for z > 40 and m ≤ 12.
    let mu4 = 4.0 * nu * nu;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..40 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        let next = -term * (mu4 - odd * odd) / (8.0 * kf * z);
        if next.abs() >= term.abs() || next == 0.0 {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    gamma_fn(nu + 1.0) * (2.0 / z).powf(nu) * sum / (2.0 * std::f64::consts::PI * z).sqrt()
}

/// Spherical average of the Gaussian kernel `p(|d e_1 - ρ σ|; t)` over `σ`.
pub fn heat_kernel_sphere_average(m: usize, d: f64, rho: f64, t: f64) -> f64 {
    let pre = (4.0 * std::f64::consts::PI * t).powf(-0.5 * m as f64);
    let gap = d - rho;
    let g = (-(gap * gap) / (4.0 * t)).exp();
    if g == 0.0 {
        return 0.0;
    }
    pre * g * sphere_exp_average(m, d * rho / (2.0 * t))
}

/// `∫_0^{r1+r2} |B(0;r1) ∩ B(ρ e_1;r2)| · m ω_m ρ^{m-1} · w(ρ) dρ`.
///
/// `breaks` are interior points where `w` or its derivatives jump or where
/// it concentrates; they are sorted and clipped to the range internally.
pub fn covariogram_integral(
    m: usize,
    r1: f64,
    r2: f64,
    weight: &dyn Fn(f64) -> f64,
    breaks: &[f64],
    spec: &QuadratureSpec,
) -> Result<ValueWithError> {
    let hi = r1 + r2;
    let area = unit_sphere_area(m);
    let mi = m as i32;
    let f = |rho: f64| {
        let w = weight(rho);
        if w == 0.0 {
            return 0.0;
        }
        overlap_volume(m, r1, r2, rho) * area * rho.powi(mi - 1) * w
    };
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|&b| b > 0.0 && b < hi).collect();
    // The covariogram itself has a kink where the smaller ball stops being
    // contained in the larger one.
    let kink = (r1 - r2).abs();
    if kink > 0.0 {
        pts.push(kink);
    }
    pts.push(0.0);
    pts.push(hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let contact = Endpoint::Power(0.5 * (m as f64 + 1.0));
    // The absolute budget is shared between the segments.
    let seg_spec = QuadratureSpec {
        abs_tol: spec.abs_tol / (pts.len() - 1) as f64,
        ..*spec
    };
    let mut total = ValueWithError::ZERO;
    for w in pts.windows(2) {
        let right = if w[1] == hi { contact } else { Endpoint::Regular };
        total = total + integrate(f, w[0], w[1], Endpoint::Regular, right, &seg_spec)?;
    }
    Ok(total)
}

/// Split points that resolve a Gaussian concentrated in a window of width
/// `~√t` just below `hi`, refining geometrically towards `hi`.
pub fn geometric_breaks_below(hi: f64, t: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut w = t.sqrt();
    while w < hi {
        out.push(hi - w);
        w *= 2.0;
    }
    out
}

/// `∫_{B(0;r1)}∫_{B(d e_1;r2)} p(x,y;t) dy dx` for any `d ≥ 0`.
pub fn gaussian_pair_integral(m: usize, r1: f64, r2: f64, d: f64, t: f64, spec: &QuadratureSpec) -> Result<ValueWithError> {
    let weight = |rho: f64| heat_kernel_sphere_average(m, d, rho, t);
    let mut breaks = geometric_breaks_below((r1 + r2).min(d), t);
    breaks.extend(geometric_breaks_below(r1 + r2, t));
    if d < r1 + r2 {
        breaks.push(d);
        breaks.extend((1..24).map(|k| d + k as f64 * t.sqrt()));
    }
    let v = covariogram_integral(m, r1, r2, &weight, &breaks, spec)?;
    Ok(v.with_extra_error(1e-13 * v.value.abs()))
}
