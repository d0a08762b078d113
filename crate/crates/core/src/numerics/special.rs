//! Gamma, incomplete gamma, incomplete beta and error functions.

use std::f64::consts::PI;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

// Lanczos approximation, g = 7, n = 9.
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural logarithm of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection keeps the Lanczos sum in its accurate range.
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    if x > 15.0 {
        return (x - 0.5) * x.ln() - x + LN_SQRT_2PI + stirling_correction(x);
    }
    let z = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    LN_SQRT_2PI + (z + 0.5) * t.ln() - t + acc.ln()
}

/// Gamma function for `x > 0`.
pub fn gamma_fn(x: f64) -> f64 {
    assert!(x > 0.0, "gamma_fn requires x > 0, got {x}");
    if x == x.floor() && x <= 171.0 {
        let mut f = 1.0;
        let mut k = 2.0;
        while k < x {
            f *= k;
            k += 1.0;
        }
        return f;
    }
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma_fn(1.0 - x));
    }
    if x > 171.0 {
        return f64::INFINITY;
    }
    let z = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    // Split the power so that large arguments do not overflow early.
    let half = t.powf(0.5 * (z + 0.5));
    (2.0 * PI).sqrt() * half * ((-t).exp() * half) * acc
}

/// `ln Γ(x) - ((x - 1/2) ln x - x + ln √(2π))` for large `x`.
fn stirling_correction(x: f64) -> f64 {
    let x2 = x * x;
    let series = 1.0 / 12.0
        - (1.0 / 360.0 - (1.0 / 1260.0 - (1.0 / 1680.0 - (1.0 / 1188.0 - 691.0 / (360_360.0 * x2)) / x2) / x2) / x2)
            / x2;
    series / x
}

/// `ln Γ(x+1) - (x + 1/2) ln x + x - ln √(2π)`.
fn stirlerr(x: f64) -> f64 {
    if x > 15.0 {
        stirling_correction(x)
    } else {
        ln_gamma(x + 1.0) - (x + 0.5) * x.ln() + x - LN_SQRT_2PI
    }
}

/// Deviance term `x ln(x/np) + np - x`, accurate when `x ≈ np`.
fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        let v2 = v * v;
        for j in 1..1000 {
            ej *= v2;
            let s1 = s + ej / (2 * j + 1) as f64;
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else {
        x * (x / np).ln() + np - x
    }
}

/// `x^a e^{-x} / Γ(a+1)` computed without overflow or catastrophic cancellation.
pub(crate) fn poisson_density(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return if a == 0.0 { 1.0 } else { 0.0 };
    }
    if a == 0.0 {
        return (-x).exp();
    }
    if a < 10.0 {
        return (a * x.ln() - x - ln_gamma(a + 1.0)).exp();
    }
    (-stirlerr(a) - bd0(a, x)).exp() / (2.0 * PI * a).sqrt()
}

const GAMMA_EPS: f64 = 1e-17;

/// Regularized incomplete gamma functions `(P(a,x), Q(a,x))`.
pub(crate) fn gamma_pq(a: f64, x: f64) -> (f64, f64) {
    assert!(a > 0.0 && x >= 0.0, "gamma_pq domain: a={a}, x={x}");
    if x == 0.0 {
        return (0.0, 1.0);
    }
    if x.is_infinite() {
        return (1.0, 0.0);
    }
    let max_iter = 2000 + (20.0 * a.sqrt()) as usize + (20.0 * x.sqrt()) as usize;
    if x < a + 1.0 {
        // P = x^a e^-x / Γ(a+1) * Σ x^n / ((a+1)...(a+n))
        let pre = poisson_density(a, x);
        let mut term = 1.0;
        let mut sum = 1.0;
        for n in 1..max_iter {
            term *= x / (a + n as f64);
            sum += term;
            if term < sum * GAMMA_EPS {
                break;
            }
        }
        let p = (pre * sum).min(1.0);
        (p, 1.0 - p)
    } else {
        // Lentz continued fraction for Q.
        let pre = a * poisson_density(a, x) / x;
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..max_iter {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < GAMMA_EPS {
                break;
            }
        }
        let q = (pre * h * x).min(1.0);
        (1.0 - q, q)
    }
}

/// Regularized lower incomplete gamma function `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    gamma_pq(a, x).0
}

/// Regularized upper incomplete gamma function `Q(a, x) = 1 - P(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    gamma_pq(a, x).1
}

pub fn erf(x: f64) -> f64 {
    if x < 0.0 {
        -erf(-x)
    } else {
        gamma_p(0.5, x * x)
    }
}

pub fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        2.0 - erfc(-x)
    } else {
        gamma_q(0.5, x * x)
    }
}

/// Regularized incomplete beta function `I_x(a, b)` for `a, b > 0`, `0 <= x <= 1`.
pub fn beta_reg(a: f64, b: f64, x: f64) -> f64 {
    assert!(a > 0.0 && b > 0.0, "beta_reg requires a, b > 0");
    assert!((0.0..=1.0).contains(&x), "beta_reg requires 0 <= x <= 1, got {x}");
    if x == 0.0 {
        return 0.0;
    }
    if x == 1.0 {
        return 1.0;
    }
    let ln_front =
        ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (-x).ln_1p();
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_cf(a, b, x) / a
    } else {
        1.0 - ln_front.exp() * beta_cf(b, a, 1.0 - x) / b
    }
}

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let tiny = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < tiny {
        d = tiny;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = 1.0 + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = 1.0 + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// Fraction of the unit sphere `S^{m-1}` in `R^m` on which `cos θ > c`,
/// where `θ` is the angle to a fixed axis.
pub fn unit_sphere_cap_fraction(m: usize, c: f64) -> f64 {
    if c >= 1.0 {
        return 0.0;
    }
    if c < -1.0 {
        return 1.0;
    }
    if m == 1 {
        // S^0 = {-1, +1}
        let hits = (1.0 > c) as u8 + (-1.0 > c) as u8;
        return hits as f64 / 2.0;
    }
    let half = 0.5 * beta_reg(0.5 * (m as f64 - 1.0), 0.5, 1.0 - c * c);
    if c >= 0.0 {
        half
    } else {
        1.0 - half
    }
}
