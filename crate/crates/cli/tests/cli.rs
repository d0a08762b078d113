use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_heatcontent");

fn run(args: &[&str], out: &Path, threads: Option<&str>) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).arg("--out").arg(out);
    match threads {
        Some(n) => cmd.env("HEATCONTENT_THREADS", n),
        None => cmd.env_remove("HEATCONTENT_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn verdict(dir: &Path, name: &str) -> Value {
    let text = std::fs::read_to_string(dir.join(format!("{name}.verdict.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const CHAIN: &str = r#"{
    "family": "chain", "m": 2, "a": "0.25", "alpha": "0.42", "n_balls": 300,
    "t_grid": {"kind": "log", "lo": "1e-4", "hi": "1e-2", "count": 5},
    "tolerances": {"rel": "1e-7"},
    "liyau": {"D1": "1.9", "D2": "2.1"},
    "mc": {"n": 20000, "seed": 7}
}"#;

#[test]
fn constants_prints_all_six() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["constants", "--m", "2", "--d1", "1.9", "--d2", "2.1"], dir.path(), None);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    for key in ["K1", "K2", "beta", "L1", "L2", "alpha_R"] {
        assert!(text.lines().any(|l| l.starts_with(&format!("{key} = "))), "{key} missing in {text}");
    }
    let k1: f64 = text.lines().next().unwrap()[5..].parse().unwrap();
    assert!((k1 - 0.25 * 0.5 * (-1.0f64 / 3.8).exp()).abs() < 1e-15);
}

#[test]
fn malformed_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "{\"m\": 2, \"a\": ");
    let o = run(&["heat-content", "--config", &cfg], dir.path(), None);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stderr).unwrap().contains("malformed config"));
    assert!(!dir.path().join("heat-content.csv").exists());
}

#[test]
fn invalid_parameters_exit_one_before_computing() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 5] = [
        &["heat-content", "--m", "2", "--a", "0.75", "--alpha", "0.4"],
        &["heat-content", "--m", "2", "--a", "0.25", "--alpha", "0.4", "--t-lo", "0", "--t-hi", "1"],
        &["constants", "--m", "2", "--d1", "2.2"],
        &["verify-thm3", "--m", "2", "--a", "0.25", "--alpha", "0.5"],
        &["verify-thm3", "--family", "chain", "--m", "2", "--a", "0.25", "--alpha", "0.42"],
    ];
    for args in cases {
        let o = run(args, dir.path(), None);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
    let o = run(&["no-such-command"], dir.path(), None);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unreachable_tolerance_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["heat-content", "--family", "chain", "--m", "2", "--a", "0.25", "--alpha", "0.42", "--n-balls", "50"],
        dir.path(),
        None,
    );
    assert_eq!(o.status.code(), Some(0));
    let o = run(
        &[
            "heat-content", "--family", "chain", "--m", "2", "--a", "0.25", "--alpha", "0.42", "--n-balls", "50",
            "--rel-tol", "1e-15",
        ],
        dir.path(),
        None,
    );
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn csv_is_byte_identical_across_runs_and_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CHAIN);
    let mut outputs = Vec::new();
    for (i, threads) in [None, Some("1"), Some("3")].into_iter().enumerate() {
        let out = dir.path().join(format!("run{i}"));
        let o = run(&["heat-content", "--config", &cfg], &out, threads);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(std::fs::read(out.join("heat-content.csv")).unwrap());
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));

    let text = String::from_utf8(outputs.pop().unwrap()).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,quantity,value,err,lower,upper,pass"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 10);
    assert_eq!(rows[0][0].parse::<f64>().unwrap(), 1e-4);
    assert_eq!(rows[9][0].parse::<f64>().unwrap(), 1e-2);
    for r in &rows {
        let err: f64 = r[3].parse().unwrap();
        assert!(err.is_finite() && err >= 0.0);
        let (v, lo, hi): (f64, f64, f64) = (r[2].parse().unwrap(), r[4].parse().unwrap(), r[5].parse().unwrap());
        assert!(lo <= v && v <= hi);
    }
}

#[test]
fn mc_check_is_reproducible_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CHAIN);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(run(&["mc-check", "--config", &cfg], &a, Some("1")).status.code(), Some(0));
    assert_eq!(run(&["mc-check", "--config", &cfg], &b, Some("2")).status.code(), Some(0));
    assert_eq!(std::fs::read(a.join("mc-check.csv")).unwrap(), std::fs::read(b.join("mc-check.csv")).unwrap());
    let v = verdict(&a, "mc-check");
    assert_eq!(v["schema"], 1);
    assert_eq!(v["pass"], true);
    assert_eq!(v["fitted"]["checks"], 10);
}

#[test]
fn sandwich_writes_rows_and_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CHAIN);
    let o = run(&["sandwich", "--config", &cfg], dir.path(), None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = verdict(dir.path(), "sandwich");
    assert_eq!(v["schema"], 1);
    assert_eq!(v["pass"], true);
    for key in ["fitted", "expected", "tolerance"] {
        assert!(!v[key].is_null(), "{key}");
    }
    let csv = std::fs::read_to_string(dir.path().join("sandwich.csv")).unwrap();
    // Both sandwiches: a functional row and a checked row per grid point.
    assert_eq!(csv.lines().count(), 1 + 2 * 2 * 5);
    assert_eq!(csv.lines().filter(|l| l.ends_with(",true")).count(), 10);
}

#[test]
fn failed_fit_exits_two_with_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &[
            "verify-thm4", "--m", "2", "--a", "0.25", "--alpha", "0.42", "--n-balls", "200", "--t-lo", "1e-3", "--t-hi",
            "1e-1", "--t-count", "5", "--exponent-tol", "1e-4",
        ],
        dir.path(),
        None,
    );
    assert_eq!(o.status.code(), Some(2));
    let v = verdict(dir.path(), "verify-thm4");
    assert_eq!(v["pass"], false);
    assert_eq!(v["expected"]["regime"], "chain_content");
    assert!((v["expected"]["exponent"].as_f64().unwrap() + 0.16 / 0.84).abs() < 1e-12);
    assert_eq!(v["tolerance"]["exponent"], 1e-4);
}

#[test]
fn riesz_reports_the_valid_side() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["riesz", "--m", "2", "--a", "0.25", "--alpha", "0.4"], dir.path(), None);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("riesz.report.json")).unwrap();
    let r: Value = serde_json::from_str(&text).unwrap();
    assert!((r["s"].as_f64().unwrap() - 1.5).abs() < 1e-15);
    assert!(r["riesz_in"]["value"].as_f64().unwrap() > 0.0);
    assert!(r["riesz_out"].is_null());
    assert!(r["c_coeff"]["value"].as_f64().unwrap() > 0.0);
    assert!(r["d_coeff"].is_null());
}

#[test]
fn lattice_content_law_is_verified() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["verify-thm3", "--m", "2", "--alpha", "0.4", "--a", "0.25"], dir.path(), None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let v = verdict(dir.path(), "verify-thm3");
    assert_eq!(v["schema"], 1);
    assert_eq!(v["pass"], true);
    assert!((v["fitted"]["exponent"].as_f64().unwrap() + 0.25).abs() <= 0.03);
    assert_eq!(v["expected"]["regime"], "lattice_content");
}
