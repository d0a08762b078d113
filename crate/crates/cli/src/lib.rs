//! Experiment runner behind the `heatcontent` binary.
//!
//! Every command reads an optional JSON configuration, applies flag
//! overrides, validates the result and only then starts computing. Exit
//! codes: 0 success, 1 invalid configuration or I/O failure, 2 a check or
//! verification failed, 3 a numerical tolerance could not be met.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use heatcontent::geometry::Family;

use config::{Decimal, ExperimentConfig, LiYau, Mc, TGrid, DEFAULT_D1, DEFAULT_D2, DEFAULT_MC_N};

/// Environment variable that overrides the worker count. Results do not
/// depend on it.
pub const THREADS_ENV: &str = "HEATCONTENT_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("verification failed: {0}")]
    Verification(String),
    /// Carries the core error's own message, which already names the failure.
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Verification(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<heatcontent::Error> for CliError {
    fn from(e: heatcontent::Error) -> Self {
        match e {
            heatcontent::Error::InvalidInput(msg) => CliError::Config(msg),
            e @ heatcontent::Error::Numerical { .. } => CliError::Numerical(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "heatcontent", version, about = "Heat content experiments on unions of balls")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Overrides,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Print the explicit sandwich constants K1, K2, beta, L1, L2, alpha_R.
    Constants,
    /// Heat content H and heat loss F on the t grid.
    HeatContent,
    /// The occupation functionals G_mu and G_nu on the t grid.
    Functional,
    /// Check both sandwich inequalities on the t grid.
    Sandwich,
    /// Fit the small-time law of a lattice union and compare it with the prediction.
    VerifyThm3,
    /// Fit the small-time exponent of a chain union and compare it with the prediction.
    VerifyThm4,
    /// Riesz-type integrals and the lattice coefficients for (m, alpha, a).
    Riesz,
    /// Compare rigorous values with seeded Monte Carlo estimates.
    McCheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Constants => "constants",
            Command::HeatContent => "heat-content",
            Command::Functional => "functional",
            Command::Sandwich => "sandwich",
            Command::VerifyThm3 => "verify-thm3",
            Command::VerifyThm4 => "verify-thm4",
            Command::Riesz => "riesz",
            Command::McCheck => "mc-check",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Lattice,
    Chain,
    Custom,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Lattice => Family::Lattice,
            FamilyArg::Chain => Family::Chain,
            FamilyArg::Custom => Family::Custom,
        }
    }
}

/// Flags that override fields of the configuration file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// JSON experiment configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for CSV and JSON outputs.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, global = true, value_enum)]
    pub family: Option<FamilyArg>,
    #[arg(long, global = true)]
    pub m: Option<usize>,
    #[arg(long, global = true)]
    pub a: Option<f64>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true)]
    pub n_balls: Option<usize>,
    #[arg(long, global = true)]
    pub t_lo: Option<f64>,
    #[arg(long, global = true)]
    pub t_hi: Option<f64>,
    #[arg(long, global = true)]
    pub t_count: Option<usize>,
    #[arg(long, global = true)]
    pub rel_tol: Option<f64>,
    #[arg(long, global = true)]
    pub exponent_tol: Option<f64>,
    #[arg(long, global = true)]
    pub coefficient_tol: Option<f64>,
    #[arg(long, global = true)]
    pub d1: Option<f64>,
    #[arg(long, global = true)]
    pub d2: Option<f64>,
    #[arg(long, global = true)]
    pub mc_n: Option<u64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

const DEFAULT_GRID_COUNT: usize = 10;

impl Overrides {
    /// The configuration file (if any) with every given flag applied.
    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(f) = self.family {
            c.family = Some(f.into());
        }
        c.m = self.m.or(c.m);
        c.a = self.a.map(Decimal).or(c.a);
        c.alpha = self.alpha.map(Decimal).or(c.alpha);
        c.n_balls = self.n_balls.or(c.n_balls);
        if self.t_lo.is_some() || self.t_hi.is_some() || self.t_count.is_some() {
            let base = c.t_grid.take();
            let lo = self.t_lo.map(Decimal).or(base.as_ref().map(|g| g.lo));
            let hi = self.t_hi.map(Decimal).or(base.as_ref().map(|g| g.hi));
            let (Some(lo), Some(hi)) = (lo, hi) else {
                return Err(CliError::Config("a t grid needs both --t-lo and --t-hi".into()));
            };
            let count = self.t_count.or(base.as_ref().map(|g| g.count)).unwrap_or(DEFAULT_GRID_COUNT);
            c.t_grid = Some(TGrid {
                kind: config::GridKind::Log,
                lo,
                hi,
                count,
            });
        }
        if let Some(x) = self.rel_tol {
            c.tolerances.rel = Some(Decimal(x));
        }
        if let Some(x) = self.exponent_tol {
            c.tolerances.exponent = Some(Decimal(x));
        }
        if let Some(x) = self.coefficient_tol {
            c.tolerances.coefficient = Some(Decimal(x));
        }
        if self.d1.is_some() || self.d2.is_some() {
            let base = c.liyau.take().unwrap_or(LiYau {
                d1: Decimal(DEFAULT_D1),
                d2: Decimal(DEFAULT_D2),
            });
            c.liyau = Some(LiYau {
                d1: self.d1.map(Decimal).unwrap_or(base.d1),
                d2: self.d2.map(Decimal).unwrap_or(base.d2),
            });
        }
        if self.mc_n.is_some() || self.seed.is_some() {
            let base = c.mc.take().unwrap_or(Mc { n: DEFAULT_MC_N, seed: 0 });
            c.mc = Some(Mc {
                n: self.mc_n.unwrap_or(base.n),
                seed: self.seed.unwrap_or(base.seed),
            });
        }
        Ok(c)
    }
}

/// Sizes the global worker pool from [`THREADS_ENV`], if set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot size the worker pool: {e}")))
}

/// Parses `args`, runs the command and returns the process exit code.
/// Diagnostics go to stderr, summaries to stdout.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = configure_threads().and_then(|()| commands::run(cli.command, &cli.opts));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("heatcontent {}: {e}", cli.command.name());
            e.exit_code()
        }
    }
}
