use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use modsg_core::model::ModelSpec;
use modsg_core::modular::ModularParams;
use serde_json::Value;
use tempfile::TempDir;

fn modsg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modsg"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn tau(t2: f64) -> f64 {
    ModelSpec::tau_for_t2(t2, &ModularParams::new(PI / 4.0).unwrap())
}

fn chain_config(symmetric: bool) -> String {
    format!(
        r#"{{"theta": {}, "model": {{"N": 2, "alpha": [0.15, 0.05], "beta": [-0.05, -0.15],
            "tau": {:?}, "symmetric": {symmetric}}}}}"#,
        PI / 4.0,
        tau(1e-2)
    )
}

fn toy_config() -> String {
    format!(
        r#"{{"theta": {}, "model": {{"N": 1, "alpha": [0.1], "beta": [-0.1], "tau": {:?}}}}}"#,
        PI / 4.0,
        tau(1e-2)
    )
}

fn json_of(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn run(cmd: &str, config: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--config", config.to_str().unwrap()];
    args.extend_from_slice(extra);
    modsg(&args)
}

#[test]
fn params_at_self_dual_point() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", &chain_config(true));
    let v = json_of(&run("params", &cfg, &[]));
    assert_eq!(v["command"], "params");
    assert!(v["truncation_order"].is_null());
    let r = &v["result"];
    assert!(r["checks"]["q_minus_qstar"].as_f64().unwrap() <= 1e-15);
    assert!(
        r["checks"]["eta2_plus_sigma2_minus_1"]
            .as_f64()
            .unwrap()
            .abs()
            <= 1e-15
    );
    assert_eq!(r["checks"]["star_involution"], true);
    let t2 = r["model"]["t2_modulus"].as_f64().unwrap();
    assert!((t2 - 1e-2).abs() < 1e-12);
    assert_eq!(r["model"]["symmetric"], true);
}

#[test]
fn selftest_passes_for_several_theta() {
    let dir = TempDir::new().unwrap();
    for theta in [PI / 4.0, PI / 3.0, 0.5] {
        let cfg = write_config(&dir, "c.json", &format!(r#"{{"theta": {theta}}}"#));
        let v = json_of(&run("selftest", &cfg, &[]));
        assert_eq!(v["result"]["passed"], true);
        assert_eq!(v["result"]["checks"].as_array().unwrap().len(), 8);
    }
}

#[test]
fn toy_reports_order_and_passes() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", &toy_config());
    let v = json_of(&run("toy", &cfg, &["--order", "6"]));
    assert_eq!(v["truncation_order"], 6);
    assert_eq!(v["config"]["bootstrap"]["order"], 6);
    assert_eq!(v["result"]["passed"], true);
    assert_eq!(v["result"]["coefficients"].as_array().unwrap().len(), 7);
}

#[test]
fn solve_finds_symmetric_pair() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", &chain_config(true));
    let v = json_of(&run("solve", &cfg, &[]));
    let state = &v["result"]["state"];
    let roots: Vec<f64> = state["roots"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r.as_f64().unwrap())
        .collect();
    assert_eq!(roots.len(), 2);
    assert!((roots[0] + roots[1]).abs() < 1e-10);
    assert!((roots[0].abs() - 0.498147447606).abs() < 1e-8);
    assert!(state["residual"].as_f64().unwrap() <= 1e-8);
    assert!(state["iterations"].as_u64().unwrap() <= 30);
}

#[test]
fn thermo_csv_has_preamble_header_and_grid_rows() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "c.json",
        r#"{"theta": 0.7853981633974483, "thermo": {"density": {"kind": "homogeneous", "mu": 0.1}}}"#,
    );
    let out = run("thermo", &cfg, &[]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# modsg thermo config_sha256="));
    assert!(lines[0].ends_with("truncation_order=none"));
    assert!(lines[1].starts_with("x,P_re,P_im,Phi1_re"));
    assert_eq!(lines.len() - 2, 61);

    let out = run("thermo", &cfg, &["--grid", "-1:1:0.5", "--format", "json"]);
    let v = json_of(&out);
    assert_eq!(v["result"]["rows"].as_array().unwrap().len(), 5);
    assert_eq!(v["result"]["functions"][5], "delta");
}

#[test]
fn output_file_and_hash_ignore_destination() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", &toy_config());
    let path = dir.path().join("out.json");
    let out = run("toy", &cfg, &["--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let file: Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    let stdout = json_of(&run("toy", &cfg, &[]));
    assert_eq!(file["config_sha256"], stdout["config_sha256"]);
    assert_eq!(file, stdout);
}

#[test]
fn csv_reports_are_key_value() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", &toy_config());
    let out = run("toy", &cfg, &["--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().ends_with("truncation_order=4"));
    assert_eq!(lines.next(), Some("key,value"));
    assert!(text.contains("\npassed,true\n"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", &chain_config(true));
    for cmd in ["params", "selftest", "solve", "thermo"] {
        let a = run(cmd, &cfg, &[]);
        let b = run(cmd, &cfg, &[]);
        assert!(a.status.success(), "{cmd}");
        assert_eq!(a.stdout, b.stdout, "{cmd}");
    }
}

#[test]
fn invalid_input_exits_with_one() {
    let dir = TempDir::new().unwrap();
    let bad_tau = format!(
        r#"{{"theta": {}, "model": {{"N": 1, "alpha": [0.1], "beta": [-0.1], "tau": 0.1}}}}"#,
        PI / 4.0
    );
    let cfg = write_config(&dir, "tau.json", &bad_tau);
    assert_eq!(run("params", &cfg, &[]).status.code(), Some(1));

    let cfg = write_config(&dir, "unknown.json", r#"{"theta": 0.5, "extra": 1}"#);
    assert_eq!(run("params", &cfg, &[]).status.code(), Some(1));

    let cfg = write_config(&dir, "theta.json", r#"{"theta": 2.0}"#);
    assert_eq!(run("params", &cfg, &[]).status.code(), Some(1));

    let cfg = write_config(&dir, "c.json", &chain_config(false));
    let out = run("toy", &cfg, &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("N = 1"));
}

#[test]
fn failed_checks_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", r#"{"theta": 0.5}"#);
    let out = run("selftest", &cfg, &["--tol", "1e-16"]);
    assert_eq!(out.status.code(), Some(2));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["result"]["passed"], false);
}

#[test]
fn io_errors_exit_with_three() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("missing.json");
    assert_eq!(run("params", &missing, &[]).status.code(), Some(3));

    let cfg = write_config(&dir, "c.json", r#"{"theta": 0.5}"#);
    let target = dir.path().join("no/such/dir/out.json");
    let out = run("params", &cfg, &["--out", target.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}
