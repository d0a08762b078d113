//! Command pipelines. Each returns its rows and verdict; [`run`] writes them.

use rayon::prelude::*;
use serde_json::{json, Value};

use heatcontent::asymptotics::{c_coeff, classify_regime, d_coeff, fit_power_law, riesz_in, riesz_out, Quantity, Regime};
use heatcontent::content::Configuration;
use heatcontent::functional::{bound_constants, sandwich_report, SandwichReport, Which};
use heatcontent::geometry::Family;
use heatcontent::kernel::Time;
use heatcontent::oracle::{mc_heat_content, mc_mu_functional, McEstimate};
use heatcontent::ValueWithError;

use crate::config::{Experiment, ExperimentConfig};
use crate::output::{csv_bytes, write_atomic, Row, Verdict};
use crate::{CliError, Command, Overrides};

/// What a command produced.
#[derive(Debug, Default)]
pub struct Outcome {
    pub rows: Option<Vec<Row>>,
    pub verdict: Option<Verdict>,
    /// Extra JSON report written beside the CSV.
    pub report: Option<Value>,
    pub summary: String,
}

pub const DEFAULT_EXPONENT_TOL_LATTICE: f64 = 0.03;
pub const DEFAULT_EXPONENT_TOL_CHAIN: f64 = 0.05;
/// Chain length used by `verify-thm4` when none is configured.
pub const DEFAULT_CHAIN_BALLS: usize = 8000;
const FIT_POINTS: usize = 9;

pub fn run(cmd: Command, opts: &Overrides) -> Result<(), CliError> {
    let cfg = opts.resolve()?;
    let out = execute(cmd, &cfg)?;
    let name = cmd.name();
    if let Some(rows) = &out.rows {
        write_atomic(&opts.out.join(format!("{name}.csv")), &csv_bytes(rows)?)?;
    }
    if let Some(report) = &out.report {
        write_atomic(&opts.out.join(format!("{name}.report.json")), &json_bytes(report)?)?;
    }
    if let Some(v) = &out.verdict {
        write_atomic(&opts.out.join(format!("{name}.verdict.json")), &json_bytes(v)?)?;
    }
    print!("{}", out.summary);
    match &out.verdict {
        Some(v) if !v.pass => Err(CliError::Verification(format!("{name} did not pass; see {name}.verdict.json"))),
        _ => Ok(()),
    }
}

fn json_bytes<T: serde::Serialize>(v: &T) -> Result<Vec<u8>, CliError> {
    let mut b = serde_json::to_vec_pretty(v).map_err(|e| CliError::Io(e.to_string()))?;
    b.push(b'\n');
    Ok(b)
}

/// Validates `cfg` for `cmd` and runs the pipeline without touching disk.
pub fn execute(cmd: Command, cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let default_family = if cmd == Command::VerifyThm4 { Family::Chain } else { Family::Lattice };
    let exp = Experiment::from_config(cfg, default_family)?;
    match cmd {
        Command::Constants => constants(&exp),
        Command::HeatContent => heat_content(&exp),
        Command::Functional => functional(&exp),
        Command::Sandwich => sandwich(&exp),
        Command::VerifyThm3 => verify_lattice(&exp),
        Command::VerifyThm4 => verify_chain(&exp),
        Command::Riesz => riesz(&exp),
        Command::McCheck => mc_check(&exp),
    }
}

fn time(t: f64) -> Result<Time, CliError> {
    Ok(Time::new(t)?)
}

fn constants(exp: &Experiment) -> Result<Outcome, CliError> {
    let b = bound_constants(exp.m, &exp.lyc)?;
    let summary = format!(
        "K1 = {}\nK2 = {}\nbeta = {}\nL1 = {}\nL2 = {}\nalpha_R = {}\n",
        b.k1, b.k2, b.beta, b.l1, b.l2, b.alpha_r
    );
    Ok(Outcome {
        summary,
        ..Outcome::default()
    })
}

/// Evaluates `f` at every grid point in parallel, keeping grid order.
fn over_grid<F>(grid: &[f64], f: F) -> Result<Vec<Row>, CliError>
where
    F: Fn(f64) -> Result<Vec<Row>, CliError> + Sync,
{
    let per_point: Vec<Result<Vec<Row>, CliError>> = grid.par_iter().map(|&t| f(t)).collect();
    let mut rows = Vec::new();
    for r in per_point {
        rows.extend(r?);
    }
    Ok(rows)
}

const DEFAULT_GRID: (f64, f64, usize) = (1e-4, 1e-1, 10);

fn default_grid(exp: &Experiment) -> Result<Vec<f64>, CliError> {
    exp.grid_or(DEFAULT_GRID.0, DEFAULT_GRID.1, DEFAULT_GRID.2)
}

fn heat_content(exp: &Experiment) -> Result<Outcome, CliError> {
    let cfg = exp.configuration()?;
    let grid = default_grid(exp)?;
    let rows = over_grid(&grid, |t| {
        let mut rows = vec![Row::enclosure(t, "H", cfg.heat_content(time(t)?, exp.rel_tol)?.h)];
        if cfg.has_finite_measure() {
            rows.push(Row::enclosure(t, "F", cfg.heat_loss(time(t)?, exp.rel_tol)?));
        }
        Ok(rows)
    })?;
    Ok(Outcome {
        summary: format!("heat-content: {} rows\n", rows.len()),
        rows: Some(rows),
        ..Outcome::default()
    })
}

fn functional(exp: &Experiment) -> Result<Outcome, CliError> {
    let cfg = exp.configuration()?;
    let grid = default_grid(exp)?;
    let rows = over_grid(&grid, |t| {
        let mut rows = vec![Row::enclosure(t, "G_mu", cfg.mu_functional(time(t)?, exp.rel_tol)?)];
        if cfg.has_finite_measure() {
            rows.push(Row::enclosure(t, "G_nu", cfg.nu_functional(time(t)?, exp.rel_tol)?));
        }
        Ok(rows)
    })?;
    Ok(Outcome {
        summary: format!("functional: {} rows\n", rows.len()),
        rows: Some(rows),
        ..Outcome::default()
    })
}

fn sandwich_rows(rep: &SandwichReport, rows: &mut Vec<Row>) {
    let (quantity, functional) = match rep.which {
        Which::Theorem1 => ("H", "G_mu"),
        Which::Theorem2 => ("F", "G_nu"),
    };
    for p in &rep.points {
        rows.push(Row::enclosure(p.t, functional, p.g));
        rows.push(Row {
            t: p.t,
            quantity: quantity.to_string(),
            value: p.value.value,
            err: p.err,
            lower: p.lower,
            upper: p.upper,
            pass: Some(p.pass),
        });
    }
}

fn sandwich_summary(rep: &SandwichReport) -> Value {
    json!({
        "which": rep.which,
        "points": rep.points.len(),
        "failing": rep.points.iter().filter(|p| !p.pass).count(),
        "min_value_over_lower": rep.points.iter().map(|p| p.value.value / p.lower).fold(f64::INFINITY, f64::min),
        "min_upper_over_value": rep.points.iter().map(|p| p.upper / p.value.value).fold(f64::INFINITY, f64::min),
    })
}

fn sandwich(exp: &Experiment) -> Result<Outcome, CliError> {
    let cfg = exp.configuration()?;
    let grid = default_grid(exp)?;
    let mut reports = vec![sandwich_report(&cfg, &grid, Which::Theorem1, &exp.lyc, exp.rel_tol)?];
    if cfg.has_finite_measure() {
        reports.push(sandwich_report(&cfg, &grid, Which::Theorem2, &exp.lyc, exp.rel_tol)?);
    }
    let mut rows = Vec::new();
    for r in &reports {
        sandwich_rows(r, &mut rows);
    }
    let pass = reports.iter().all(|r| r.pass);
    let constants = reports[0].constants;
    let verdict = Verdict::new(
        "sandwich",
        pass,
        Value::Array(reports.iter().map(sandwich_summary).collect()),
        json!({ "constants": constants }),
        json!({ "rel": exp.rel_tol }),
    );
    let summary = reports
        .iter()
        .map(|r| {
            let failing = r.points.iter().filter(|p| !p.pass).count();
            format!("sandwich {:?}: {} of {} points pass\n", r.which, r.points.len() - failing, r.points.len())
        })
        .collect();
    Ok(Outcome {
        rows: Some(rows),
        verdict: Some(verdict),
        report: None,
        summary,
    })
}

fn evaluate(cfg: &Configuration, q: Quantity, t: f64, rel: f64) -> Result<ValueWithError, CliError> {
    Ok(match q {
        Quantity::H => cfg.heat_content(time(t)?, rel)?.h,
        Quantity::F => cfg.heat_loss(time(t)?, rel)?,
    })
}

fn quantity_name(q: Quantity) -> &'static str {
    match q {
        Quantity::H => "H",
        Quantity::F => "F",
    }
}

struct FitCheck {
    rows: Vec<Row>,
    verdict: Verdict,
    summary: String,
}

fn fit_and_compare(
    command: &str,
    exp: &Experiment,
    cfg: &Configuration,
    law: heatcontent::asymptotics::RegimeLaw,
    grid: &[f64],
    exponent_tol: f64,
) -> Result<FitCheck, CliError> {
    if grid.len() < 4 {
        return Err(CliError::Config("a fit needs at least 4 grid points".into()));
    }
    let name = quantity_name(law.quantity);
    let rows = over_grid(grid, |t| Ok(vec![Row::enclosure(t, name, evaluate(cfg, law.quantity, t, exp.rel_tol)?)]))?;
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.t, r.value)).collect();
    let fit = fit_power_law(&pts)?;
    let exponent_ok = (fit.exponent - law.exponent).abs() <= exponent_tol;
    let coefficient_ratio = law.coefficient.map(|c| fit.coefficient / c);
    let coefficient_ok = match (exp.coefficient_tol, coefficient_ratio) {
        (Some(tol), Some(ratio)) => (ratio - 1.0).abs() <= tol,
        _ => true,
    };
    let pass = exponent_ok && coefficient_ok;
    let verdict = Verdict::new(
        command,
        pass,
        json!({
            "exponent": fit.exponent,
            "coefficient": fit.coefficient,
            "coefficient_ratio": coefficient_ratio,
            "r_squared": fit.r_squared,
            "t_window": [fit.t_window.0, fit.t_window.1],
            "points": pts.len(),
        }),
        json!(law),
        json!({ "exponent": exponent_tol, "coefficient": exp.coefficient_tol, "rel": exp.rel_tol }),
    );
    let summary = format!(
        "{command}: {:?} regime, fitted {name} exponent {:.4} vs {:.4} (tolerance {exponent_tol}) over t in [{:e}, {:e}]: {}\n",
        law.regime,
        fit.exponent,
        law.exponent,
        fit.t_window.0,
        fit.t_window.1,
        if pass { "PASS" } else { "FAIL" }
    );
    Ok(FitCheck { rows, verdict, summary })
}

fn require_family(exp: &Experiment, family: Family, command: &str) -> Result<(), CliError> {
    if exp.family != family {
        return Err(CliError::Config(format!("{command} applies to {family} configurations, got {}", exp.family)));
    }
    Ok(())
}

fn verify_lattice(exp: &Experiment) -> Result<Outcome, CliError> {
    require_family(exp, Family::Lattice, "verify-thm3")?;
    let profile = exp.profile()?;
    let law = classify_regime(exp.m, profile, Family::Lattice)?;
    if law.regime == Regime::NotCovered {
        return Err(CliError::Config(format!(
            "alpha = {} in dimension {} has no small-time law to verify",
            profile.alpha, exp.m
        )));
    }
    let cfg = exp.configuration()?;
    let (lo, hi) = law.default_fit_window();
    let grid = exp.grid_or(lo, hi, FIT_POINTS)?;
    let tol = exp.exponent_tol.unwrap_or(DEFAULT_EXPONENT_TOL_LATTICE);
    let check = fit_and_compare("verify-thm3", exp, &cfg, law, &grid, tol)?;
    Ok(Outcome {
        rows: Some(check.rows),
        verdict: Some(check.verdict),
        report: None,
        summary: check.summary,
    })
}

fn verify_chain(exp: &Experiment) -> Result<Outcome, CliError> {
    require_family(exp, Family::Chain, "verify-thm4")?;
    let profile = exp.profile()?;
    let law = classify_regime(exp.m, profile, Family::Chain)?;
    if law.regime == Regime::NotCovered {
        return Err(CliError::Config(format!(
            "alpha = {} in dimension {} is outside the chain regime",
            profile.alpha, exp.m
        )));
    }
    let mut exp = exp.clone();
    exp.n_balls = Some(exp.n_balls.unwrap_or(DEFAULT_CHAIN_BALLS));
    let cfg = exp.configuration()?;
    // The finite chain saturates at its measure once √t drops below its
    // smallest radii, so the default window stops two decades short of 1e-3.
    let grid = exp.grid_or(1e-5, 1e-3, FIT_POINTS)?;
    let tol = exp.exponent_tol.unwrap_or(DEFAULT_EXPONENT_TOL_CHAIN);
    let check = fit_and_compare("verify-thm4", &exp, &cfg, law, &grid, tol)?;
    Ok(Outcome {
        rows: Some(check.rows),
        verdict: Some(check.verdict),
        report: None,
        summary: check.summary,
    })
}

fn enclosure_json(v: heatcontent::Result<ValueWithError>) -> Result<Value, CliError> {
    match v {
        Ok(v) => Ok(json!({ "value": v.value, "err": v.error_bound })),
        Err(heatcontent::Error::InvalidInput(_)) => Ok(Value::Null),
        Err(e) => Err(e.into()),
    }
}

fn riesz(exp: &Experiment) -> Result<Outcome, CliError> {
    let p = exp.profile()?;
    let s = 2.0 * exp.m as f64 - 1.0 / p.alpha;
    let report = json!({
        "m": exp.m,
        "a": p.a,
        "alpha": p.alpha,
        "s": s,
        "riesz_in": enclosure_json(riesz_in(exp.m, s))?,
        "riesz_out": enclosure_json(riesz_out(exp.m, s))?,
        "c_coeff": enclosure_json(c_coeff(exp.m, p.alpha, p.a))?,
        "d_coeff": enclosure_json(d_coeff(exp.m, p.alpha, p.a))?,
    });
    let summary = format!("{}\n", serde_json::to_string_pretty(&report).map_err(|e| CliError::Io(e.to_string()))?);
    Ok(Outcome {
        report: Some(report),
        summary,
        ..Outcome::default()
    })
}

fn mc_row(t: f64, quantity: &str, mc: &McEstimate, exact: ValueWithError, k: f64) -> Row {
    let half = k * mc.std_error;
    Row {
        t,
        quantity: quantity.to_string(),
        value: mc.value,
        err: mc.std_error,
        lower: mc.value - half,
        upper: mc.value + half,
        pass: Some(exact.upper() >= mc.value - half && exact.lower() <= mc.value + half),
    }
}

fn mc_check(exp: &Experiment) -> Result<Outcome, CliError> {
    let u = exp.finite_union()?.ok_or_else(|| {
        CliError::Config("mc-check needs a finite union: give n_balls or a custom balls list".into())
    })?;
    let grid = default_grid(exp)?;
    let (n, k) = (exp.mc_n, exp.mc_sigmas);
    let rows = over_grid(&grid, |t| {
        // Distinct streams per grid point and per estimator, all derived from the seed.
        let i = grid.iter().position(|&x| x == t).unwrap_or(0) as u64;
        let seed_h = exp.seed.wrapping_add(2 * i);
        let seed_mu = exp.seed.wrapping_add(2 * i + 1);
        let h = heatcontent::content::heat_content(&u, time(t)?, exp.rel_tol)?.h;
        let g = heatcontent::functional::mu_functional(&u, time(t)?, exp.rel_tol)?;
        let mc_h = mc_heat_content(&u, time(t)?, n, seed_h)?;
        let mc_g = mc_mu_functional(&u, time(t)?, n, seed_mu)?;
        Ok(vec![
            Row::enclosure(t, "H", h),
            mc_row(t, "H_mc", &mc_h, h, k),
            Row::enclosure(t, "G_mu", g),
            mc_row(t, "G_mu_mc", &mc_g, g, k),
        ])
    })?;
    let checks: Vec<&Row> = rows.iter().filter(|r| r.pass.is_some()).collect();
    let failing = checks.iter().filter(|r| r.pass == Some(false)).count();
    let verdict = Verdict::new(
        "mc-check",
        failing == 0,
        json!({ "checks": checks.len(), "failing": failing }),
        json!({ "agreement": "rigorous enclosure meets the Monte Carlo interval" }),
        json!({ "sigmas": k, "n": n, "seed": exp.seed }),
    );
    Ok(Outcome {
        summary: format!("mc-check: {} of {} checks pass\n", checks.len() - failing, checks.len()),
        rows: Some(rows),
        verdict: Some(verdict),
        report: None,
    })
}
