//! Seeded Monte Carlo estimators, used only as independent cross-checks of
//! the deterministic quadratures.
//!
//! Samples are drawn in fixed-size blocks. Block `b` of stratum `s` reads
//! ChaCha8 stream `(s << 32) | b` under the caller's seed, and block
//! statistics are merged in index order, so estimates do not depend on the
//! number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::content::union_temperature;
use crate::error::{Error, Result};
use crate::geometry::{mu, unit_ball_volume, unit_sphere_area, BallUnion};
use crate::kernel::{ball_temperature, Time};
use crate::numerics::gamma_fn;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n: u64,
    pub seed: u64,
}

impl McEstimate {
    /// Whether `x` lies within `k` standard errors of the estimate.
    pub fn covers(&self, x: f64, k: f64) -> bool {
        (self.value - x).abs() <= k * self.std_error
    }
}

const BLOCK: u64 = 4096;

/// Count, mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, o: Moments) -> Moments {
        if self.n == 0 {
            return o;
        }
        if o.n == 0 {
            return self;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        let mean = self.mean + d * o.n as f64 / n as f64;
        let m2 = self.m2 + o.m2 + d * d * (self.n as f64) * (o.n as f64) / n as f64;
        Moments { n, mean, m2 }
    }

    /// Variance of the mean.
    fn var_of_mean(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        self.m2 / ((self.n - 1) as f64 * self.n as f64)
    }
}

fn stream_rng(seed: u64, stratum: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((stratum << 32) | block);
    rng
}

/// Moments of `n` draws of `f` in stratum `stratum`.
fn sample<F>(n: u64, seed: u64, stratum: u64, f: F) -> Moments
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    let blocks = n.div_ceil(BLOCK);
    let parts: Vec<Moments> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, stratum, b);
            let count = BLOCK.min(n - b * BLOCK);
            let mut mo = Moments::default();
            for _ in 0..count {
                mo.push(f(&mut rng));
            }
            mo
        })
        .collect();
    parts.into_iter().fold(Moments::default(), Moments::merge)
}

/// Uniform point of the unit sphere `S^{m-1}`.
fn direction<R: Rng>(m: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..m).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Uniform point of `B(c; r)`.
fn in_ball<R: Rng>(c: &[f64], r: f64, rng: &mut R) -> Vec<f64> {
    let m = c.len();
    let dir = direction(m, rng);
    let u: f64 = rng.random();
    let rho = r * u.powf(1.0 / m as f64);
    c.iter().zip(dir).map(|(ci, di)| ci + rho * di).collect()
}

fn check_n(n: u64) -> Result<()> {
    if n < 2 {
        return Err(Error::invalid("Monte Carlo needs at least 2 samples"));
    }
    Ok(())
}

/// `∫_Ω g = Σ_i |B_i| E[g(X_i)]` with `X_i` uniform in ball `i` and samples
/// allotted in proportion to ball volume.
fn stratified<G>(u: &BallUnion, n: u64, seed: u64, g: G) -> Result<McEstimate>
where
    G: Fn(&[f64]) -> f64 + Sync,
{
    check_n(n)?;
    let balls = u.balls();
    let vols: Vec<f64> = balls.iter().map(|b| b.volume()).collect();
    let total: f64 = vols.iter().sum();
    let mut value = 0.0;
    let mut var = 0.0;
    let mut used = 0;
    for (i, (b, &v)) in balls.iter().zip(&vols).enumerate() {
        let ni = ((n as f64 * v / total).round() as u64).max(2);
        let mo = sample(ni, seed, i as u64, |rng| g(&in_ball(&b.center, b.radius, rng)));
        value += v * mo.mean;
        var += v * v * mo.var_of_mean();
        used += ni;
    }
    Ok(McEstimate {
        value,
        std_error: var.sqrt(),
        n: used,
        seed,
    })
}

/// `H_Ω(t) = ∫_Ω u_Ω(x;t) dx`, stratified by ball.
pub fn mc_heat_content(u: &BallUnion, t: Time, n: u64, seed: u64) -> Result<McEstimate> {
    stratified(u, n, seed, |x| union_temperature(u, x, t))
}

/// `∫_Ω μ_Ω(x;√t) dx / (ω_m t^{m/2})` with `μ` evaluated exactly per sample.
pub fn mc_mu_functional(u: &BallUnion, t: Time, n: u64, seed: u64) -> Result<McEstimate> {
    let m = u.dim();
    let big_r = t.get().sqrt();
    let vol = unit_ball_volume(m) * big_r.powi(m as i32);
    let est = stratified(u, n, seed, |x| mu(u, x, big_r))?;
    Ok(McEstimate {
        value: est.value / vol,
        std_error: est.std_error / vol,
        ..est
    })
}

/// `∫_{B(0;r1)} u_{B(d e_1; r2)}(x;t) dx`, sampling `x` uniformly.
pub fn mc_cross_content(m: usize, r1: f64, r2: f64, d: f64, t: Time, n: u64, seed: u64) -> Result<McEstimate> {
    check_n(n)?;
    let origin = vec![0.0; m];
    let mut c2 = vec![0.0; m];
    c2[0] = d;
    let v1 = unit_ball_volume(m) * r1.powi(m as i32);
    let mo = sample(n, seed, 0, |rng| ball_temperature(m, &c2, r2, &in_ball(&origin, r1, rng), t));
    Ok(McEstimate {
        value: v1 * mo.mean,
        std_error: v1 * mo.var_of_mean().sqrt(),
        n,
        seed,
    })
}

/// Estimate `scale · p` from hit counts with probability `p`.
fn hit_rate<F>(scale: f64, n: u64, seed: u64, hit: F) -> Result<McEstimate>
where
    F: Fn(&mut ChaCha8Rng) -> bool + Sync,
{
    check_n(n)?;
    let mo = sample(n, seed, 0, |rng| hit(rng) as u8 as f64);
    let p = mo.mean;
    Ok(McEstimate {
        value: scale * p,
        std_error: scale * (p * (1.0 - p) / n as f64).sqrt(),
        n,
        seed,
    })
}

/// Volume of `B(0;r1) ∩ B(d e_1;r2)` by hit counting in the smaller ball.
pub fn mc_overlap_volume(m: usize, r1: f64, r2: f64, d: f64, n: u64, seed: u64) -> Result<McEstimate> {
    if m == 0 || !(r1 > 0.0 && r2 > 0.0 && d >= 0.0) {
        return Err(Error::invalid("overlap needs m >= 1, positive radii and d >= 0"));
    }
    // Sample in the smaller ball, placed at the origin.
    let (small, big) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
    let origin = vec![0.0; m];
    let scale = unit_ball_volume(m) * small.powi(m as i32);
    hit_rate(scale, n, seed, |rng| {
        let x = in_ball(&origin, small, rng);
        let dx = x[0] - d;
        let rest: f64 = x[1..].iter().map(|c| c * c).sum();
        dx * dx + rest < big * big
    })
}

/// `∫_{B_1}∫_{B_1} |x-y|^{-s}`: draw `x` uniform and `y = x + ρθ` with
/// density `∝ |x-y|^{-s}` on `B(x;2)`, and count `y ∈ B_1`.
pub fn mc_riesz_in(m: usize, s: f64, n: u64, seed: u64) -> Result<McEstimate> {
    let mf = m as f64;
    if m == 0 || !(s >= 0.0 && s < mf) {
        return Err(Error::invalid(format!("riesz_in needs 0 <= s < m, got s={s}")));
    }
    let omega = unit_ball_volume(m);
    let z = unit_sphere_area(m) * 2f64.powf(mf - s) / (mf - s);
    let origin = vec![0.0; m];
    hit_rate(omega * z, n, seed, |rng| {
        let x = in_ball(&origin, 1.0, rng);
        let u: f64 = rng.random();
        let rho = 2.0 * u.powf(1.0 / (mf - s));
        let dir = direction(m, rng);
        x.iter().zip(&dir).map(|(a, b)| (a + rho * b).powi(2)).sum::<f64>() < 1.0
    })
}

/// `∫_{B_1}∫_{ℝ^m \ B_1} |x-y|^{-s}`: draw `|x|` with density
/// `∝ u^{m-1}(1-u)^{m-s}`, `y = x + ρθ` with density `∝ ρ^{-s}` beyond the
/// distance `1-|x|` to the sphere, and count `|y| > 1`.
pub fn mc_riesz_out(m: usize, s: f64, n: u64, seed: u64) -> Result<McEstimate> {
    let mf = m as f64;
    if m == 0 || !(s > mf && s < mf + 1.0) {
        return Err(Error::invalid(format!("riesz_out needs m < s < m + 1, got s={s}")));
    }
    let area = unit_sphere_area(m);
    let b = gamma_fn(mf) * gamma_fn(mf - s + 1.0) / gamma_fn(2.0 * mf - s + 1.0);
    let scale = area * area / (s - mf) * b;
    let radial = Beta::new(mf, mf - s + 1.0).map_err(|e| Error::invalid(e.to_string()))?;
    hit_rate(scale, n, seed, |rng| {
        let u = radial.sample(rng);
        let x: Vec<f64> = direction(m, rng).into_iter().map(|c| u * c).collect();
        let rho0 = 1.0 - u;
        let v: f64 = rng.random();
        let rho = rho0 * (1.0 - v).powf(-1.0 / (s - mf));
        let dir = direction(m, rng);
        x.iter().zip(&dir).map(|(a, b)| (a + rho * b).powi(2)).sum::<f64>() > 1.0
    })
}
