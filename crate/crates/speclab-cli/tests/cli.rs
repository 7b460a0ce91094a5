use std::path::Path;
use std::process::Command;

use serde_json::{json, Value};

fn speclab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_speclab"))
}

fn write_config(dir: &Path, value: &Value) -> std::path::PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, serde_json::to_vec(value).unwrap()).unwrap();
    p
}

fn run(experiment: &str, config: &Value, extra: &[&str]) -> (Option<i32>, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), config);
    let out = dir.path().join("out");
    let status = speclab()
        .arg(experiment)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(extra)
        .output()
        .unwrap()
        .status;
    (status.code(), dir)
}

fn report(dir: &tempfile::TempDir, experiment: &str) -> Value {
    let p = dir.path().join("out").join(format!("{experiment}.json"));
    serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap()
}

#[test]
fn count3ap_on_riesz() {
    let cfg = json!({ "seed": 1, "measure": { "kind": "riesz", "frequencies": [4, 16, 64] }, "window": 100 });
    let (code, dir) = run("count3ap", &cfg, &[]);
    assert_eq!(code, Some(0));
    let r = report(&dir, "count3ap");
    assert_eq!(r["schema"], "v1");
    assert_eq!(r["results"]["fft"], r["results"]["brute"]);
}

#[test]
fn dual_check_seed_seven() {
    let cfg = json!({ "seed": 0, "suite": "trilinear", "degree": 64, "trials": 100 });
    let (code, dir) = run("dual-check", &cfg, &["--seed", "7"]);
    assert_eq!(code, Some(0));
    let r = report(&dir, "dual-check");
    assert_eq!(r["seed"], 7);
    assert!(r["results"]["trilinear_max_relative_error"].as_f64().unwrap() < 1e-9);
}

#[test]
fn failing_check_exits_one_and_keeps_the_report() {
    let cfg = json!({ "seed": 1, "measure": { "kind": "lebesgue" }, "samples": 10, "expected": 0.5, "tolerance": 0.01 });
    let (code, dir) = run("dimension", &cfg, &[]);
    assert_eq!(code, Some(1));
    let r = report(&dir, "dimension");
    assert_eq!(r["checks"][1]["pass"], false);
}

#[test]
fn schema_violations_exit_two() {
    let (code, _) = run("coeffs", &json!({ "seed": 1, "window": 3 }), &[]);
    assert_eq!(code, Some(2));
    let (code, _) = run("coeffs", &json!({ "measure": { "kind": "lebesgue" }, "window": 3 }), &[]);
    assert_eq!(code, Some(2));
    let (code, _) = run("no-such-experiment", &json!({ "seed": 1 }), &[]);
    assert_eq!(code, Some(2));
}

#[test]
fn point_clouds_have_full_precision() {
    let cfg = json!({ "seed": 1, "delta": 0.05, "v_samples": 2, "plane_samples": 50, "gamma_planes": 100, "nonvanishing_samples": 100, "kernel_samples": 20 });
    let (code, dir) = run("construction-verify", &cfg, &[]);
    assert_eq!(code, Some(0));
    let text = std::fs::read_to_string(dir.path().join("out").join("cover_centers.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,y,z"));
    let first = lines.next().unwrap().split(',').next().unwrap().to_string();
    let mantissa = first.trim_start_matches('-').split('e').next().unwrap().replace('.', "");
    assert_eq!(mantissa.len(), 17);
}
