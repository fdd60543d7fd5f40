use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cone_exponents::exponents::c_of_beta;
use cone_exponents::{OperatorSpec, QuadratureConfig};
use serde_json::{json, Value};
use tempfile::TempDir;

fn conexp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_conexp")).args(args).env_remove("CONE_EXP_CACHE").output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn coarse() -> Value {
    serde_json::to_value(QuadratureConfig::coarse()).unwrap()
}

/// Write a config into `dir` with outputs under `dir/out/run`.
fn config(dir: &Path, operator: Value, cone: Value, tasks: Value, extra: Value) -> PathBuf {
    let mut cfg = json!({
        "operator": operator,
        "cone": cone,
        "quadrature": coarse(),
        "tasks": tasks,
        "output": dir.join("out/run"),
    });
    if let (Some(m), Some(e)) = (cfg.as_object_mut(), extra.as_object()) {
        m.extend(e.clone());
    }
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

fn fractional() -> Value {
    serde_json::to_value(OperatorSpec::fractional(0.5)).unwrap()
}

fn half_plane() -> Value {
    json!({ "dimension": 2, "shape": { "type": "half_space", "axis": [0.0, 1.0] } })
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect()
}

fn report(dir: &Path, task: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join(format!("out/run.{task}.json"))).unwrap()).unwrap()
}

#[test]
fn empty_task_list_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = config(dir.path(), fractional(), half_plane(), json!([]), json!({}));
    assert_eq!(code(&conexp(&["run", cfg.to_str().unwrap()])), 2);
}

#[test]
fn malformed_configs_are_rejected() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, "{ not json").unwrap();
    assert_eq!(code(&conexp(&["run", path.to_str().unwrap()])), 2);
    assert_eq!(code(&conexp(&["run", dir.path().join("missing.json").to_str().unwrap()])), 2);

    // α out of range
    let op = json!({ "kind": "fractional_laplacian", "lambda_lower": 1.0, "lambda_upper": 1.0, "alpha": 1.5 });
    let cfg = config(dir.path(), op, half_plane(), json!(["symbol"]), json!({}));
    let out = conexp(&["run", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("operator."));

    // a sector in three dimensions
    let cone = json!({ "dimension": 3, "shape": { "type": "planar_sector", "aperture": 1.0 } });
    let cfg = config(dir.path(), fractional(), cone, json!(["symbol"]), json!({}));
    assert_eq!(code(&conexp(&["run", cfg.to_str().unwrap()])), 2);
}

#[test]
fn symbol_task_writes_a_convex_curve_with_two_roots() {
    let dir = TempDir::new().unwrap();
    let cfg = config(dir.path(), fractional(), half_plane(), json!(["symbol"]), json!({}));
    let out = conexp(&["run", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let header = fs::read_to_string(dir.path().join("out/run.symbol.csv")).unwrap();
    assert!(header.starts_with("beta,c\n"));
    let rows = csv_rows(&dir.path().join("out/run.symbol.csv"));
    assert_eq!(rows.len(), 40);
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r[0].parse().unwrap(), r[1].parse().unwrap())).collect();
    assert!(pts[0].0 > -1.0 && pts[39].0 < 2.0);
    let changes = pts.windows(2).filter(|w| w[0].1.signum() != w[1].1.signum()).count();
    assert_eq!(changes, 2);
    for w in pts.windows(3) {
        assert!(w[0].1 - 2.0 * w[1].1 + w[2].1 > 0.0);
    }
    // values agree with the library on the same grid
    let cfg = QuadratureConfig::coarse();
    for &(b, c) in pts.iter().step_by(13) {
        let direct = c_of_beta(b, &OperatorSpec::fractional(0.5), 2, &cfg).unwrap();
        assert!((direct - c).abs() <= 1e-12 * direct.abs().max(1.0));
    }
    let rep = report(dir.path(), "symbol");
    assert_eq!(rep["status"], "completed");
    assert_eq!(rep["data"]["sign_changes"], 2);
}

#[test]
fn exponents_and_verdicts_on_the_half_plane() {
    let dir = TempDir::new().unwrap();
    let cache = dir.path().join("cache.jsonl");
    let tasks = json!([{ "liouville": [1.6, 2.0, -0.5, -1.5] }, "exponents"]);
    let cfg = config(dir.path(), fractional(), half_plane(), tasks, json!({ "cache": cache }));
    let first = conexp(&["run", cfg.to_str().unwrap()]);
    assert_eq!(code(&first), 0, "{}", String::from_utf8_lossy(&first.stderr));

    let rows = csv_rows(&dir.path().join("out/run.exponents.csv"));
    assert_eq!(rows[0][0], "beta_plus");
    assert_eq!(rows[1][0], "beta_minus");
    let plus: f64 = rows[0][1].parse().unwrap();
    let minus: f64 = rows[1][1].parse().unwrap();
    assert!((plus - 1.5).abs() < 1e-2, "{plus}");
    assert!((minus + 0.5).abs() < 1e-2, "{minus}");

    let rows = csv_rows(&dir.path().join("out/run.liouville.csv"));
    let verdicts: Vec<&str> = rows.iter().map(|r| r[5].as_str()).collect();
    // p* = 5/3 and -1; negative p is only classified for M⁻
    assert_eq!(verdicts, ["no_positive_supersolution", "inconclusive", "inconclusive", "unbounded_supersolutions_only"]);
    let t_plus: f64 = rows[0][3].parse().unwrap();
    assert!((t_plus - 5.0 / 3.0).abs() < 2e-2);

    let csv_first = fs::read(dir.path().join("out/run.exponents.csv")).unwrap();
    let cold = report(dir.path(), "exponents");
    assert_eq!(cold["data"]["cache_hit"], false);

    // a second run reads the cache
    let second = conexp(&["run", cfg.to_str().unwrap()]);
    assert_eq!(code(&second), 0);
    let warm = report(dir.path(), "exponents");
    assert_eq!(warm["data"]["cache_hit"], true);
    let (t_cold, t_warm) = (cold["seconds"].as_f64().unwrap(), warm["seconds"].as_f64().unwrap());
    assert!(t_cold >= 5.0 * t_warm, "cold {t_cold}s, warm {t_warm}s");
    assert_eq!(csv_first, fs::read(dir.path().join("out/run.exponents.csv")).unwrap());

    let listing = conexp(&["show-cache", cache.to_str().unwrap()]);
    assert_eq!(code(&listing), 0);
    let text = String::from_utf8_lossy(&listing.stdout);
    assert!(text.starts_with("1 records"), "{text}");
    assert!(text.contains("FractionalLaplacian"));
}

#[test]
fn identical_runs_give_identical_csv() {
    let dir = TempDir::new().unwrap();
    let tasks = json!(["symbol", "dimension_like"]);
    let extra = json!({ "symbol_betas": [-0.9, -0.3, 0.4, 1.2, 1.9] });
    let cfg = config(dir.path(), serde_json::to_value(OperatorSpec::pucci_plus(0.5, 1.0, 2.0)).unwrap(), half_plane(), tasks, extra);
    let read = |t: &str| fs::read(dir.path().join(format!("out/run.{t}.csv"))).unwrap();
    assert_eq!(code(&conexp(&["run", cfg.to_str().unwrap()])), 0);
    let (a, b) = (read("symbol"), read("dimension_like"));
    assert_eq!(code(&conexp(&["--threads", "1", "run", cfg.to_str().unwrap()])), 0);
    assert_eq!(a, read("symbol"));
    assert_eq!(b, read("dimension_like"));
}

#[test]
fn numerical_failure_exits_3_with_the_error_in_the_report() {
    let dir = TempDir::new().unwrap();
    let op = serde_json::to_value(cone_exponents::acceptance::two_kernel_isaacs()).unwrap();
    let cfg = config(dir.path(), op, half_plane(), json!(["dimension_like"]), json!({}));
    let out = conexp(&["run", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 3);
    let rep = report(dir.path(), "dimension_like");
    assert_eq!(rep["status"], "failed");
    assert!(rep["error"].as_str().unwrap().starts_with("precondition failed"));
}

#[test]
fn kelvin_is_skipped_for_pucci() {
    let dir = TempDir::new().unwrap();
    let op = serde_json::to_value(OperatorSpec::pucci_minus(0.5, 1.0, 2.0)).unwrap();
    let cfg = config(dir.path(), op, half_plane(), json!(["kelvin"]), json!({}));
    assert_eq!(code(&conexp(&["run", cfg.to_str().unwrap()])), 0);
    assert_eq!(report(dir.path(), "kelvin")["status"], "skipped");
}

#[test]
fn cache_path_follows_the_environment() {
    let dir = TempDir::new().unwrap();
    let env_cache = dir.path().join("env/cache.jsonl");
    let cone = json!({ "dimension": 2, "shape": { "type": "planar_sector", "aperture": 1.5 * std::f64::consts::PI } });
    let cfg = config(dir.path(), fractional(), cone, json!(["exponents"]), json!({ "cache": dir.path().join("cfg.jsonl") }));
    let out = Command::new(env!("CARGO_BIN_EXE_conexp"))
        .args(["run", cfg.to_str().unwrap()])
        .env("CONE_EXP_CACHE", &env_cache)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(env_cache.exists());
    assert!(!dir.path().join("cfg.jsonl").exists());
}

#[test]
fn verify_reports_per_criterion() {
    let dir = TempDir::new().unwrap();
    let cfg = config(dir.path(), fractional(), half_plane(), json!([]), json!({}));
    let out = conexp(&["verify", "--criteria", "2,12", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("[PASS]  2"));
    assert!(text.contains("[PASS] 12"));
    let rows = csv_rows(&dir.path().join("out/run.verify.csv"));
    assert_eq!(rows.len(), 2);
}

#[test]
fn verify_with_tightened_tolerance_fails_cleanly() {
    let dir = TempDir::new().unwrap();
    let mut q = QuadratureConfig::coarse();
    q.tol /= 100.0;
    let cfg = config(dir.path(), fractional(), half_plane(), json!([]), json!({ "quadrature": q }));
    let out = conexp(&["verify", "--criteria", "4", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("[FAIL]  4"));
    assert!(text.contains("ToleranceNotMet"), "{text}");
}

#[test]
fn sweep_over_apertures() {
    let dir = TempDir::new().unwrap();
    let cone = json!({ "dimension": 2, "shape": { "type": "planar_sector", "aperture": 1.0 } });
    let cfg = config(dir.path(), fractional(), cone, json!([]), json!({}));
    let pi = std::f64::consts::PI;
    let out = conexp(&[
        "sweep",
        "--param",
        "aperture",
        "--from",
        &(0.5 * pi).to_string(),
        "--to",
        &pi.to_string(),
        "--steps",
        "1",
        cfg.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&dir.path().join("out/run.sweep.csv"));
    assert_eq!(rows.len(), 2);
    let p: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    let m: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(p[0] > p[1] && m[0] < m[1]);

    let wrong = conexp(&["sweep", "--param", "half-angle", "--from", "1", "--to", "2", "--steps", "1", cfg.to_str().unwrap()]);
    assert_eq!(code(&wrong), 2);
}

#[test]
fn show_cache_needs_a_file() {
    assert_eq!(code(&conexp(&["show-cache", "/nonexistent/cache.jsonl"])), 2);
}
