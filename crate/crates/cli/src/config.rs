//! Experiment configuration: the JSON file schema, flag overrides and the
//! validated form every command runs from.

use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize};

use heatcontent::content::{Configuration, HeadSize};
use heatcontent::functional::euclidean_liyau_constants;
use heatcontent::geometry::{make_chain_config, make_lattice_config, Ball, BallUnion, Family, RadiusProfile};
use heatcontent::kernel::LiYauConstants;

use crate::CliError;

/// A real number given either as a JSON number or as a decimal string.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Decimal(pub f64);

impl<'de> Deserialize<'de> for Decimal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(Decimal(x)),
            Raw::Str(s) => s
                .trim()
                .parse::<f64>()
                .map(Decimal)
                .map_err(|_| serde::de::Error::custom(format!("not a decimal number: {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TGrid {
    pub kind: GridKind,
    pub lo: Decimal,
    pub hi: Decimal,
    pub count: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Relative accuracy requested from the rigorous evaluators.
    pub rel: Option<Decimal>,
    /// Allowed distance between fitted and predicted exponents.
    pub exponent: Option<Decimal>,
    /// Allowed relative deviation of the fitted coefficient, when gated.
    pub coefficient: Option<Decimal>,
    /// Monte Carlo agreement threshold in standard errors.
    pub mc_sigmas: Option<Decimal>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiYau {
    #[serde(rename = "D1", alias = "d1")]
    pub d1: Decimal,
    #[serde(rename = "D2", alias = "d2")]
    pub d2: Decimal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mc {
    pub n: u64,
    pub seed: u64,
}

/// The on-disk configuration. Every field is optional so that flags can
/// supply or override any of them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub family: Option<Family>,
    pub m: Option<usize>,
    pub a: Option<Decimal>,
    pub alpha: Option<Decimal>,
    pub n_balls: Option<usize>,
    pub balls: Option<Vec<Ball>>,
    pub t_grid: Option<TGrid>,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub liyau: Option<LiYau>,
    pub mc: Option<Mc>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("malformed config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

pub const DEFAULT_REL_TOL: f64 = 1e-6;
pub const DEFAULT_D1: f64 = 1.9;
pub const DEFAULT_D2: f64 = 2.1;
pub const DEFAULT_MC_N: u64 = 100_000;
pub const DEFAULT_MC_SIGMAS: f64 = 4.0;

/// A log-spaced grid whose first and last points are exactly `lo` and `hi`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>, CliError> {
    if !(lo > 0.0 && lo.is_finite()) {
        return Err(CliError::Config(format!("t_grid lo must be positive, got {lo}")));
    }
    if !(hi >= lo && hi.is_finite()) {
        return Err(CliError::Config(format!("t_grid hi must be finite and at least lo, got {hi}")));
    }
    if count == 0 || (count == 1 && hi != lo) {
        return Err(CliError::Config("t_grid count must be at least 2 unless lo = hi".into()));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let (l0, l1) = (lo.ln(), hi.ln());
    let step = (l1 - l0) / (count - 1) as f64;
    Ok((0..count)
        .map(|i| match i {
            0 => lo,
            i if i == count - 1 => hi,
            i => (l0 + step * i as f64).exp(),
        })
        .collect())
}

/// Configuration after defaults, overrides and every precondition check.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub family: Family,
    pub m: usize,
    pub profile: Option<RadiusProfile>,
    pub n_balls: Option<usize>,
    pub union: Option<BallUnion>,
    /// `None` when no grid was configured; commands choose their own.
    pub grid: Option<Vec<f64>>,
    pub rel_tol: f64,
    pub exponent_tol: Option<f64>,
    pub coefficient_tol: Option<f64>,
    pub mc_sigmas: f64,
    pub d1: f64,
    pub d2: f64,
    pub lyc: LiYauConstants,
    pub mc_n: u64,
    pub seed: u64,
}

fn invalid(e: heatcontent::Error) -> CliError {
    CliError::Config(e.to_string())
}

impl Experiment {
    /// Applies defaults and checks every precondition. `default_family` is
    /// used when the configuration names none and lists no balls.
    pub fn from_config(c: &ExperimentConfig, default_family: Family) -> Result<Self, CliError> {
        let m = c.m.ok_or_else(|| CliError::Config("dimension m is required".into()))?;
        if m == 0 {
            return Err(CliError::Config("dimension m must be at least 1".into()));
        }
        let family = c.family.unwrap_or(if c.balls.is_some() { Family::Custom } else { default_family });

        let profile = match (c.a, c.alpha) {
            (Some(a), Some(alpha)) => Some(RadiusProfile::new(a.0, alpha.0).map_err(invalid)?),
            (None, None) => None,
            _ => return Err(CliError::Config("a and alpha must be given together".into())),
        };
        if family != Family::Custom && c.balls.is_some() {
            return Err(CliError::Config("an explicit balls list requires family custom".into()));
        }
        if c.n_balls == Some(0) {
            return Err(CliError::Config("n_balls must be at least 1".into()));
        }

        let union = match family {
            Family::Custom => {
                let balls = c
                    .balls
                    .as_ref()
                    .ok_or_else(|| CliError::Config("family custom needs a balls list".into()))?;
                let balls = balls
                    .iter()
                    .map(|b| Ball::new(b.center.clone(), b.radius))
                    .collect::<heatcontent::Result<Vec<_>>>()
                    .map_err(invalid)?;
                Some(BallUnion::new(m, balls, Family::Custom, None).map_err(invalid)?)
            }
            _ => None,
        };

        let grid = c
            .t_grid
            .as_ref()
            .map(|g| log_grid(g.lo.0, g.hi.0, g.count))
            .transpose()?;

        let tol = &c.tolerances;
        let rel_tol = tol.rel.map_or(DEFAULT_REL_TOL, |d| d.0);
        if !(rel_tol > 0.0 && rel_tol < 1.0) {
            return Err(CliError::Config(format!("relative tolerance must lie in (0, 1), got {rel_tol}")));
        }
        let positive = |name: &str, v: Option<Decimal>| -> Result<Option<f64>, CliError> {
            match v {
                Some(Decimal(x)) if !(x > 0.0 && x.is_finite()) => {
                    Err(CliError::Config(format!("{name} tolerance must be positive, got {x}")))
                }
                v => Ok(v.map(|d| d.0)),
            }
        };
        let exponent_tol = positive("exponent", tol.exponent)?;
        let coefficient_tol = positive("coefficient", tol.coefficient)?;
        let mc_sigmas = positive("mc_sigmas", tol.mc_sigmas)?.unwrap_or(DEFAULT_MC_SIGMAS);

        let (d1, d2) = c.liyau.as_ref().map_or((DEFAULT_D1, DEFAULT_D2), |l| (l.d1.0, l.d2.0));
        let lyc = euclidean_liyau_constants(m, d1, d2).map_err(invalid)?;

        let (mc_n, seed) = c.mc.as_ref().map_or((DEFAULT_MC_N, 0), |mc| (mc.n, mc.seed));
        if mc_n < 2 {
            return Err(CliError::Config("mc n must be at least 2".into()));
        }

        Ok(Self {
            family,
            m,
            profile,
            n_balls: c.n_balls,
            union,
            grid,
            rel_tol,
            exponent_tol,
            coefficient_tol,
            mc_sigmas,
            d1,
            d2,
            lyc,
            mc_n,
            seed,
        })
    }

    pub fn profile(&self) -> Result<RadiusProfile, CliError> {
        self.profile
            .ok_or_else(|| CliError::Config("this command needs a and alpha".into()))
    }

    pub fn grid_or(&self, lo: f64, hi: f64, count: usize) -> Result<Vec<f64>, CliError> {
        match &self.grid {
            Some(g) => Ok(g.clone()),
            None => log_grid(lo, hi, count),
        }
    }

    /// A finite union, if the configuration describes one.
    pub fn finite_union(&self) -> Result<Option<BallUnion>, CliError> {
        if let Some(u) = &self.union {
            return Ok(Some(u.clone()));
        }
        let Some(n) = self.n_balls else { return Ok(None) };
        let p = self.profile()?;
        let u = match self.family {
            Family::Lattice => make_lattice_config(self.m, p.a, p.alpha, n),
            Family::Chain => make_chain_config(self.m, p.a, p.alpha, n),
            Family::Custom => unreachable!("custom unions are built during validation"),
        };
        u.map(Some).map_err(invalid)
    }

    /// The configuration to evaluate: a finite union when one is described,
    /// otherwise the infinite lattice.
    pub fn configuration(&self) -> Result<Configuration, CliError> {
        if let Some(u) = self.finite_union()? {
            return Ok(Configuration::Finite(u));
        }
        match self.family {
            Family::Lattice => Ok(Configuration::Lattice {
                m: self.m,
                profile: self.profile()?,
                head: HeadSize::Auto,
            }),
            Family::Chain => Err(CliError::Config("chain configurations need n_balls".into())),
            Family::Custom => unreachable!("custom unions are built during validation"),
        }
    }
}
