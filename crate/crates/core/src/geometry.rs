//! Balls, disjoint ball unions and their volumes.
//!
//! Every union handled here is interior-disjoint, so measures of
//! intersections with a union split into sums over individual balls.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{beta_reg, gamma_fn, neumaier_sum};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid(format!("ball radius must be positive, got {radius}")));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("ball center has a non-finite coordinate"));
        }
        Ok(Self { center, radius })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn volume(&self) -> f64 {
        unit_ball_volume(self.dim()) * self.radius.powi(self.dim() as i32)
    }

    pub fn distance_to(&self, other: &Ball) -> f64 {
        distance(&self.center, &other.center)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Lattice,
    Chain,
    Custom,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::Lattice => "lattice",
            Family::Chain => "chain",
            Family::Custom => "custom",
        })
    }
}

/// Radii `r_i = a i^{-α}` for `i = 1, 2, ...`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusProfile {
    pub a: f64,
    pub alpha: f64,
}

impl RadiusProfile {
    pub fn new(a: f64, alpha: f64) -> Result<Self> {
        if !(a > 0.0 && a <= 0.5) {
            return Err(Error::invalid(format!("radius scale a must lie in (0, 1/2], got {a}")));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::invalid(format!("decay exponent alpha must be positive, got {alpha}")));
        }
        Ok(Self { a, alpha })
    }

    /// Radius of the `i`-th ball, 1-based.
    pub fn radius(&self, i: usize) -> f64 {
        debug_assert!(i >= 1);
        self.a * (i as f64).powf(-self.alpha)
    }
}

/// Generator record carried by lattice and chain unions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub a: f64,
    pub alpha: f64,
    pub n: usize,
}

impl GeneratorParams {
    pub fn profile(&self) -> RadiusProfile {
        RadiusProfile {
            a: self.a,
            alpha: self.alpha,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallUnion {
    dim: usize,
    balls: Vec<Ball>,
    family: Family,
    params: Option<GeneratorParams>,
}

// Relative slack for touching balls in a chain.
const TOUCH_RTOL: f64 = 1e-12;

impl BallUnion {
    /// Builds a union after checking dimensions, radius ordering and pairwise
    /// interior-disjointness.
    pub fn new(dim: usize, balls: Vec<Ball>, family: Family, params: Option<GeneratorParams>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        if balls.is_empty() {
            return Err(Error::invalid("a ball union needs at least one ball"));
        }
        for (i, b) in balls.iter().enumerate() {
            if b.center.len() != dim {
                return Err(Error::invalid(format!(
                    "ball {i} has {} coordinates, expected {dim}",
                    b.center.len()
                )));
            }
            if !(b.radius > 0.0 && b.radius.is_finite()) {
                return Err(Error::invalid(format!("ball {i} has non-positive radius {}", b.radius)));
            }
        }
        if let Some(i) = balls.windows(2).position(|w| w[1].radius > w[0].radius) {
            return Err(Error::invalid(format!(
                "radii must be non-increasing, but r_{} < r_{}",
                i + 1,
                i + 2
            )));
        }
        if family == Family::Lattice && balls[0].radius >= 0.5 {
            return Err(Error::invalid("lattice unions need 1 - 2 r_1 > 0"));
        }
        if family != Family::Custom && params.is_none() {
            return Err(Error::invalid(format!("{family} unions carry generator parameters")));
        }
        check_disjoint(&balls, family == Family::Chain)?;
        Ok(Self {
            dim,
            balls,
            family,
            params,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn balls(&self) -> &[Ball] {
        &self.balls
    }

    pub fn len(&self) -> usize {
        self.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn params(&self) -> Option<GeneratorParams> {
        self.params
    }

    /// Gap `1 - 2 r_1` between lattice balls; `None` for other families.
    pub fn delta(&self) -> Option<f64> {
        (self.family == Family::Lattice).then(|| 1.0 - 2.0 * self.balls[0].radius)
    }
}

#[derive(Deserialize)]
struct BallUnionRepr {
    dim: usize,
    balls: Vec<Ball>,
    family: Family,
    #[serde(default)]
    params: Option<GeneratorParams>,
}

impl<'de> Deserialize<'de> for BallUnion {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = BallUnionRepr::deserialize(d)?;
        BallUnion::new(r.dim, r.balls, r.family, r.params).map_err(serde::de::Error::custom)
    }
}

/// Sweep along the first axis; only pairs whose projections overlap are compared.
fn check_disjoint(balls: &[Ball], allow_touching: bool) -> Result<()> {
    let mut order: Vec<usize> = (0..balls.len()).collect();
    order.sort_by(|&i, &j| {
        let li = balls[i].center[0] - balls[i].radius;
        let lj = balls[j].center[0] - balls[j].radius;
        li.total_cmp(&lj).then(i.cmp(&j))
    });
    for (k, &i) in order.iter().enumerate() {
        let bi = &balls[i];
        let right = bi.center[0] + bi.radius;
        for &j in &order[k + 1..] {
            let bj = &balls[j];
            if bj.center[0] - bj.radius > right {
                break;
            }
            let d = bi.distance_to(bj);
            let s = bi.radius + bj.radius;
            let ok = if allow_touching {
                d >= s * (1.0 - TOUCH_RTOL)
            } else {
                d >= s
            };
            if !ok {
                return Err(Error::invalid(format!(
                    "balls {i} and {j} overlap: distance {d} < radii sum {s}"
                )));
            }
        }
    }
    Ok(())
}

pub(crate) fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Volume `ω_m` of the unit ball in `ℝ^m`.
pub fn unit_ball_volume(m: usize) -> f64 {
    assert!(m >= 1, "dimension must be at least 1");
    let half = 0.5 * m as f64;
    PI.powf(half) / gamma_fn(half + 1.0)
}

/// Surface area `m ω_m` of the unit sphere in `ℝ^m`.
pub fn unit_sphere_area(m: usize) -> f64 {
    m as f64 * unit_ball_volume(m)
}

/// Volume of the cap of height `h` cut from a ball of radius `r`.
pub fn cap_volume(m: usize, r: f64, h: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::invalid(format!("cap radius must be positive, got {r}")));
    }
    if !(0.0..=2.0 * r).contains(&h) {
        return Err(Error::invalid(format!("cap height {h} outside [0, {}]", 2.0 * r)));
    }
    Ok(cap_unchecked(m, r, h))
}

fn cap_unchecked(m: usize, r: f64, h: f64) -> f64 {
    let full = unit_ball_volume(m) * r.powi(m as i32);
    if h <= 0.0 {
        return 0.0;
    }
    if h >= 2.0 * r {
        return full;
    }
    if h > r {
        return full - cap_unchecked(m, r, 2.0 * r - h);
    }
    let y = (r - h) / r;
    let x = h * (2.0 * r - h) / (r * r);
    0.5 * full * beta_upper_half(m, x, y * y)
}

/// `I_x((m+1)/2, 1/2)` given both `x` and `y = 1 - x`, evaluated from
/// whichever side has the smaller argument.
fn beta_upper_half(m: usize, x: f64, y: f64) -> f64 {
    let p = 0.5 * (m as f64 + 1.0);
    if y < 0.5 {
        1.0 - beta_reg(0.5, p, y)
    } else {
        beta_reg(p, 0.5, x)
    }
}

/// `|B(0;r1) ∩ B(d e_1; r2)|`.
pub fn overlap_volume(m: usize, r1: f64, r2: f64, d: f64) -> f64 {
    debug_assert!(r1 > 0.0 && r2 > 0.0 && d >= 0.0);
    if d >= r1 + r2 {
        return 0.0;
    }
    let (small, large) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
    if d <= large - small {
        return unit_ball_volume(m) * small.powi(m as i32);
    }
    if r1 == r2 {
        return equal_overlap(m, r1, d);
    }
    // Plane of intersection sits at x1 from the first center.
    let x1 = (d * d + r1 * r1 - r2 * r2) / (2.0 * d);
    let h1 = (r1 - x1).clamp(0.0, 2.0 * r1);
    let h2 = (r2 - (d - x1)).clamp(0.0, 2.0 * r2);
    cap_unchecked(m, r1, h1) + cap_unchecked(m, r2, h2)
}

/// `|B(0;r1) \ B(d e_1; r2)|`, accurate also when the result is tiny.
pub fn deficit_volume(m: usize, r1: f64, r2: f64, d: f64) -> f64 {
    if r1 == r2 {
        if d >= 2.0 * r1 {
            return unit_ball_volume(m) * r1.powi(m as i32);
        }
        let s = d / (2.0 * r1);
        return unit_ball_volume(m) * r1.powi(m as i32) * beta_reg(0.5, 0.5 * (m as f64 + 1.0), s * s);
    }
    (unit_ball_volume(m) * r1.powi(m as i32) - overlap_volume(m, r1, r2, d)).max(0.0)
}

fn equal_overlap(m: usize, r: f64, d: f64) -> f64 {
    let s = d / (2.0 * r);
    unit_ball_volume(m) * r.powi(m as i32) * beta_upper_half(m, (1.0 - s) * (1.0 + s), s * s)
}

/// The first `n` points of `ℤ^m` ordered by squared norm, ties broken
/// lexicographically.
pub fn lattice_points(m: usize, n: usize) -> Vec<Vec<i64>> {
    assert!(m >= 1);
    if n == 0 {
        return Vec::new();
    }
    let omega = unit_ball_volume(m);
    let mut radius = (n as f64 / omega).powf(1.0 / m as f64) + (m as f64).sqrt() + 1.0;
    loop {
        let r2 = (radius * radius).floor() as i64;
        let mut pts = Vec::new();
        let mut cur = vec![0i64; m];
        collect_points(m, 0, r2, &mut cur, &mut pts);
        if pts.len() >= n {
            pts.sort_by(|p, q| norm2(p).cmp(&norm2(q)).then_with(|| p.cmp(q)));
            pts.truncate(n);
            return pts;
        }
        radius *= 1.5;
    }
}

fn norm2(p: &[i64]) -> i64 {
    p.iter().map(|c| c * c).sum()
}

fn collect_points(m: usize, k: usize, budget: i64, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
    if k == m {
        out.push(cur.clone());
        return;
    }
    let lim = (budget as f64).sqrt().floor() as i64;
    for c in -lim..=lim {
        let rest = budget - c * c;
        if rest < 0 {
            continue;
        }
        cur[k] = c;
        collect_points(m, k + 1, rest, cur, out);
    }
    cur[k] = 0;
}

/// Balls `B(z_i; a i^{-α})` centred on the first `n` lattice points.
pub fn make_lattice_config(m: usize, a: f64, alpha: f64, n: usize) -> Result<BallUnion> {
    if !(a > 0.0 && a < 0.5) {
        return Err(Error::invalid(format!("lattice radius scale must lie in (0, 1/2), got {a}")));
    }
    let profile = RadiusProfile::new(a, alpha)?;
    if n == 0 || m == 0 {
        return Err(Error::invalid("lattice unions need m >= 1 and n >= 1"));
    }
    let balls = lattice_points(m, n)
        .into_iter()
        .enumerate()
        .map(|(i, z)| Ball {
            center: z.into_iter().map(|c| c as f64).collect(),
            radius: profile.radius(i + 1),
        })
        .collect();
    // Disjointness holds by construction: r_i + r_j <= 2a < 1.
    Ok(BallUnion {
        dim: m,
        balls,
        family: Family::Lattice,
        params: Some(GeneratorParams { a, alpha, n }),
    })
}

/// Collinear touching balls along the first axis, starting at the origin.
pub fn make_chain_config(m: usize, a: f64, alpha: f64, n: usize) -> Result<BallUnion> {
    if !(a > 0.0 && a.is_finite() && alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("chain needs a > 0 and alpha > 0, got a={a}, alpha={alpha}")));
    }
    if n == 0 || m == 0 {
        return Err(Error::invalid("chain unions need m >= 1 and n >= 1"));
    }
    let profile = RadiusProfile { a, alpha };
    let mut balls = Vec::with_capacity(n);
    let mut pos = crate::numerics::NeumaierSum::new();
    for i in 1..=n {
        let r = profile.radius(i);
        if i > 1 {
            pos.add(profile.radius(i - 1));
            pos.add(r);
        }
        let mut center = vec![0.0; m];
        center[0] = pos.total();
        balls.push(Ball { center, radius: r });
    }
    Ok(BallUnion {
        dim: m,
        balls,
        family: Family::Chain,
        params: Some(GeneratorParams { a, alpha, n }),
    })
}

/// `|B(x;R) ∩ U|`.
pub fn mu(u: &BallUnion, x: &[f64], r: f64) -> f64 {
    assert_eq!(x.len(), u.dim, "point dimension mismatch");
    let m = u.dim;
    neumaier_sum(u.balls.iter().filter_map(|b| {
        let d = distance(x, &b.center);
        (d < r + b.radius).then(|| overlap_volume(m, r, b.radius, d))
    }))
}

/// `|B(x;R) \ U|`.
pub fn nu(u: &BallUnion, x: &[f64], r: f64) -> f64 {
    (unit_ball_volume(u.dim) * r.powi(u.dim as i32) - mu(u, x, r)).max(0.0)
}

/// Lebesgue measure of the union.
pub fn total_measure(u: &BallUnion) -> f64 {
    let m = u.dim as i32;
    unit_ball_volume(u.dim) * neumaier_sum(u.balls.iter().rev().map(|b| b.radius.powi(m)))
}

/// Boundary measure: the sum of sphere areas.
pub fn perimeter(u: &BallUnion) -> f64 {
    let m = u.dim as i32;
    unit_sphere_area(u.dim) * neumaier_sum(u.balls.iter().rev().map(|b| b.radius.powi(m - 1)))
}

/// Convergence data for a series `Σ_i a^k i^{-p}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesWitness {
    pub exponent: f64,
    pub converges: bool,
    /// Partial sum over the first `WITNESS_TERMS` terms.
    pub partial_sum: f64,
    /// Upper bound on the remaining tail, when the series converges.
    pub tail_bound: Option<f64>,
}

pub const WITNESS_TERMS: usize = 10_000;

impl SeriesWitness {
    fn new(scale: f64, p: f64) -> Self {
        let n = WITNESS_TERMS;
        let partial = scale * neumaier_sum((1..=n).rev().map(|i| (i as f64).powf(-p)));
        let converges = p > 1.0;
        let tail_bound = converges.then(|| scale * (n as f64).powf(1.0 - p) / (p - 1.0));
        Self {
            exponent: p,
            converges,
            partial_sum: partial,
            tail_bound,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessSums {
    pub heat_content: SeriesWitness,
    pub measure: SeriesWitness,
    pub perimeter: SeriesWitness,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinitenessReport {
    pub heat_content_finite: bool,
    pub measure_finite: bool,
    pub perimeter_finite: bool,
    pub witness_sums: WitnessSums,
}

/// Which global quantities stay finite for the infinite lattice or chain
/// built from `profile`.
///
/// Lattice heat content is governed by `Σ r_i^{2m}`; for the chain the
/// touching contacts make `Σ r_i^{2m-1}` the relevant series.
pub fn finiteness_report(m: usize, profile: RadiusProfile, family: Family) -> Result<FinitenessReport> {
    if m == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    let mf = m as f64;
    let a = profile.a;
    let alpha = profile.alpha;
    let heat_content = match family {
        Family::Lattice => SeriesWitness::new(a.powf(2.0 * mf), 2.0 * mf * alpha),
        Family::Chain => SeriesWitness::new(a.powf(2.0 * mf - 1.0), (2.0 * mf - 1.0) * alpha),
        Family::Custom => {
            return Err(Error::invalid("finiteness is only classified for lattice and chain profiles"))
        }
    };
    let measure = SeriesWitness::new(a.powf(mf), mf * alpha);
    let perimeter = SeriesWitness::new(a.powf(mf - 1.0), (mf - 1.0) * alpha);
    Ok(FinitenessReport {
        heat_content_finite: heat_content.converges,
        measure_finite: measure.converges,
        perimeter_finite: m >= 2 && perimeter.converges,
        witness_sums: WitnessSums {
            heat_content,
            measure,
            perimeter,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unit_ball_volumes() {
        assert_relative_eq!(unit_ball_volume(1), 2.0, max_relative = 1e-15);
        assert_relative_eq!(unit_ball_volume(2), PI, max_relative = 1e-15);
        assert_relative_eq!(unit_ball_volume(3), 4.0 * PI / 3.0, max_relative = 1e-15);
        assert_relative_eq!(unit_ball_volume(4), PI * PI / 2.0, max_relative = 1e-15);
    }

    #[test]
    fn cap_endpoints_and_hemisphere() {
        for m in 1..=5 {
            let full = unit_ball_volume(m) * 1.7f64.powi(m as i32);
            assert_eq!(cap_volume(m, 1.7, 0.0).unwrap(), 0.0);
            assert_relative_eq!(cap_volume(m, 1.7, 3.4).unwrap(), full, max_relative = 1e-14);
            assert_relative_eq!(cap_volume(m, 1.7, 1.7).unwrap(), 0.5 * full, max_relative = 1e-13);
        }
        assert!(cap_volume(2, 1.0, 2.5).is_err());
        assert!(cap_volume(2, 1.0, -0.1).is_err());
    }

    #[test]
    fn cap_matches_elementary_formulas() {
        // m = 3: π h² (3r - h) / 3.
        for &h in &[0.1, 0.6, 1.3, 1.9] {
            let want = PI * h * h * (3.0 - h) / 3.0;
            assert_relative_eq!(cap_volume(3, 1.0, h).unwrap(), want, max_relative = 1e-13);
        }
        // m = 2: circular segment r² acos((r-h)/r) - (r-h) √(2rh - h²).
        for &h in &[0.05f64, 0.5, 1.5] {
            let want = (1.0 - h).acos() - (1.0 - h) * (2.0 * h - h * h).sqrt();
            assert_relative_eq!(cap_volume(2, 1.0, h).unwrap(), want, max_relative = 1e-13);
        }
    }

    #[test]
    fn overlap_closed_forms() {
        assert_eq!(overlap_volume(2, 1.0, 1.0, 2.0), 0.0);
        assert_relative_eq!(overlap_volume(2, 1.0, 1.0, 0.0), PI, max_relative = 1e-15);
        let lens = 2.0 * PI / 3.0 - 3f64.sqrt() / 2.0;
        assert_relative_eq!(overlap_volume(2, 1.0, 1.0, 1.0), lens, max_relative = 1e-13);
        // Nested balls give the smaller one.
        assert_relative_eq!(overlap_volume(3, 0.5, 2.0, 1.0), unit_ball_volume(3) / 8.0, max_relative = 1e-14);
        // m = 1 is interval intersection length.
        assert_relative_eq!(overlap_volume(1, 1.0, 0.5, 1.2), 0.3, max_relative = 1e-13);
    }

    #[test]
    fn overlap_lens_matches_hit_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 400_000;
        let mut hits = 0usize;
        for _ in 0..n {
            let x: f64 = rng.random_range(-1.0..1.0);
            let y: f64 = rng.random_range(-1.0..1.0);
            if x * x + y * y < 1.0 && (x - 1.0) * (x - 1.0) + y * y < 1.0 {
                hits += 1;
            }
        }
        let p = hits as f64 / n as f64;
        let est = 4.0 * p;
        let se = 4.0 * (p * (1.0 - p) / n as f64).sqrt();
        assert!((est - overlap_volume(2, 1.0, 1.0, 1.0)).abs() < 4.0 * se);
    }

    #[test]
    fn unequal_overlap_by_three_dimensional_lens_formula() {
        // Lens volume π (R + r - d)² (d² + 2dr - 3r² + 2dR + 6rR - 3R²) / (12 d).
        let (r1, r2, d): (f64, f64, f64) = (1.0, 0.7, 1.2);
        let want = PI * (r1 + r2 - d).powi(2) * (d * d + 2.0 * d * r2 - 3.0 * r2 * r2 + 2.0 * d * r1 + 6.0 * r1 * r2 - 3.0 * r1 * r1)
            / (12.0 * d);
        assert_relative_eq!(overlap_volume(3, r1, r2, d), want, max_relative = 1e-13);
        assert_relative_eq!(overlap_volume(3, r2, r1, d), want, max_relative = 1e-13);
    }

    #[test]
    fn deficit_is_complement_of_overlap() {
        for m in 1..=4 {
            for &d in &[1e-6, 0.3, 1.1, 1.99, 2.5] {
                let full = unit_ball_volume(m);
                let sum = deficit_volume(m, 1.0, 1.0, d) + overlap_volume(m, 1.0, 1.0, d);
                assert_relative_eq!(sum, full, max_relative = 1e-14);
            }
        }
        // Small displacement: deficit ~ ω_{m-1} r^{m-1} d.
        let d = 1e-9;
        assert_relative_eq!(deficit_volume(3, 1.0, 1.0, d), PI * d, max_relative = 1e-6);
    }

    #[test]
    fn thin_caps_keep_relative_accuracy() {
        // m = 3 cap volume π h² (3r - h) / 3 for tiny h.
        for &h in &[1e-12f64, 1e-9, 1e-6] {
            let want = PI * h * h * (3.0 - h) / 3.0;
            assert_relative_eq!(cap_volume(3, 1.0, h).unwrap(), want, max_relative = 1e-12);
        }
    }

    #[test]
    fn lattice_enumeration_order() {
        let pts = lattice_points(2, 9);
        assert_eq!(pts[0], vec![0, 0]);
        assert_eq!(&pts[1..5], &[vec![-1, 0], vec![0, -1], vec![0, 1], vec![1, 0]]);
        assert_eq!(&pts[5..9], &[vec![-1, -1], vec![-1, 1], vec![1, -1], vec![1, 1]]);
        assert_eq!(lattice_points(1, 5), vec![vec![0], vec![-1], vec![1], vec![-2], vec![2]]);
        // Counting points in a disc of radius 10 (Gauss circle problem value).
        let pts = lattice_points(2, 317);
        assert!(pts.iter().all(|p| norm2(p) <= 100));
        assert_eq!(norm2(&lattice_points(2, 318)[317]), 101);
    }

    #[test]
    fn lattice_config_examples() {
        let u = make_lattice_config(2, 0.25, 0.4, 1).unwrap();
        assert_eq!(u.len(), 1);
        assert_eq!(u.balls()[0].center, vec![0.0, 0.0]);
        let u = make_lattice_config(2, 0.25, 0.4, 5).unwrap();
        assert_relative_eq!(u.balls()[4].radius, 0.131_32, max_relative = 1e-4);
        assert_relative_eq!(u.delta().unwrap(), 0.5);
        assert!(make_lattice_config(2, 0.5, 0.4, 5).is_err());
        let u = make_lattice_config(3, 0.3, 0.2, 300).unwrap();
        assert!(BallUnion::new(3, u.balls().to_vec(), Family::Lattice, u.params()).is_ok());
    }

    #[test]
    fn chain_config_examples() {
        let u = make_chain_config(2, 0.25, 0.42, 1).unwrap();
        assert_eq!(u.balls()[0].center, vec![0.0, 0.0]);
        let u = make_chain_config(2, 0.25, 0.42, 400).unwrap();
        assert_relative_eq!(u.balls()[1].center[0], 0.25 * (1.0 + 2f64.powf(-0.42)), max_relative = 1e-15);
        assert_relative_eq!(u.balls()[1].center[0], 0.436_86, max_relative = 1e-5);
        for w in u.balls().windows(2) {
            let gap = w[0].distance_to(&w[1]) - w[0].radius - w[1].radius;
            assert!(gap.abs() <= 1e-12 * (w[0].radius + w[1].radius), "gap {gap}");
        }
        assert!(BallUnion::new(2, u.balls().to_vec(), Family::Chain, u.params()).is_ok());
        // The same balls are rejected as a custom union, which forbids contact.
        let shifted = vec![
            Ball::new(vec![0.0, 0.0], 0.5).unwrap(),
            Ball::new(vec![0.9, 0.0], 0.45).unwrap(),
        ];
        assert!(BallUnion::new(2, shifted, Family::Custom, None).is_err());
    }

    #[test]
    fn mu_and_nu_examples() {
        let u = make_lattice_config(2, 0.25, 0.4, 50).unwrap();
        assert_relative_eq!(mu(&u, &[0.0, 0.0], 0.1), PI * 0.01, max_relative = 1e-14);
        assert_relative_eq!(mu(&u, &[0.0, 0.0], 0.5), PI * 0.0625, max_relative = 1e-14);

        let iv = BallUnion::new(
            1,
            vec![Ball::new(vec![0.0], 0.25).unwrap(), Ball::new(vec![1.0], 0.15).unwrap()],
            Family::Custom,
            None,
        )
        .unwrap();
        assert_relative_eq!(mu(&iv, &[0.5], 0.4), 0.20, max_relative = 1e-13);
        assert_relative_eq!(nu(&iv, &[0.5], 0.4), 0.60, max_relative = 1e-13);
        assert_relative_eq!(nu(&iv, &[10.0], 0.4), 0.8, max_relative = 1e-15);
        assert_eq!(nu(&iv, &[0.0], 0.1), 0.0);
    }

    #[test]
    fn measure_and_perimeter() {
        let u = BallUnion::new(3, vec![Ball::new(vec![0.0; 3], 1.0).unwrap()], Family::Custom, None).unwrap();
        assert_relative_eq!(total_measure(&u), 4.0 * PI / 3.0, max_relative = 1e-15);
        assert_relative_eq!(perimeter(&u), 4.0 * PI, max_relative = 1e-15);
    }

    #[test]
    fn lattice_perimeter_converges_to_zeta_limit() {
        // Σ 2π a i^{-1.5} = 2π a ζ(3/2); the tail beyond N lies in
        // [∫_{N+1}^∞, ∫_N^∞] of the summand.
        let zeta_3_2 = 2.612_375_348_685_488_3;
        let (a, n) = (0.25, 20_000usize);
        let u = make_lattice_config(2, a, 1.5, n).unwrap();
        let head = perimeter(&u);
        let c = 2.0 * PI * a;
        let lo = head + c * 2.0 * ((n + 1) as f64).powf(-0.5);
        let hi = head + c * 2.0 * (n as f64).powf(-0.5);
        let limit = c * zeta_3_2;
        assert!(lo <= limit && limit <= hi, "{lo} <= {limit} <= {hi}");
    }

    #[test]
    fn finiteness_examples() {
        let p = RadiusProfile::new(0.25, 0.4).unwrap();
        let r = finiteness_report(2, p, Family::Lattice).unwrap();
        assert!(r.heat_content_finite && !r.measure_finite && !r.perimeter_finite);
        let r = finiteness_report(2, RadiusProfile::new(0.25, 0.2).unwrap(), Family::Lattice).unwrap();
        assert!(!r.heat_content_finite);
        let r = finiteness_report(2, RadiusProfile::new(0.25, 0.30).unwrap(), Family::Chain).unwrap();
        assert!(!r.heat_content_finite);
        let r = finiteness_report(2, RadiusProfile::new(0.25, 0.42).unwrap(), Family::Chain).unwrap();
        assert!(r.heat_content_finite);
        assert!(finiteness_report(2, p, Family::Custom).is_err());
    }

    #[test]
    fn union_round_trips_through_json() {
        let u = make_chain_config(2, 0.25, 0.42, 6).unwrap();
        let s = serde_json::to_string(&u).unwrap();
        let back: BallUnion = serde_json::from_str(&s).unwrap();
        assert_eq!(u, back);
        let bad = r#"{"dim":1,"balls":[{"center":[0.0],"radius":0.5},{"center":[0.6],"radius":0.4}],"family":"custom"}"#;
        assert!(serde_json::from_str::<BallUnion>(bad).is_err());
    }
}
