use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use neumann_rigidity::discretization::build_disk_mesh;
use neumann_rigidity::io::write_mesh;
use serde_json::Value;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_rigidity");

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, json).unwrap();
    path
}

fn run(config: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .arg("--config")
        .arg(config)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok_json(out: Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn square(n: usize, extra: &str) -> String {
    format!(r#"{{"domain": "rectangle", "lx": 1, "ly": 1, "nx": {n}, "ny": {n}, "a": 2, "q": 4{extra}}}"#)
}

#[test]
fn constants_report_the_chain() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", &square(32, ""));
    let out = ok_json(run(&cfg, &["constants", "--m", "2"]));
    assert!((out["xi_a"].as_f64().unwrap() - 1.256431).abs() < 1e-6);
    assert!((out["eps_star"].as_f64().unwrap() - 0.1533).abs() < 5e-4);
    let threshold = out["thresholds"][0]["threshold"].as_f64().unwrap();
    assert!((threshold - 0.546).abs() < 2e-3, "{threshold}");
    assert!((out["c1"].as_f64().unwrap() - 0.772589).abs() < 1e-6);
}

#[test]
fn a_at_most_one_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", &square(8, "").replace(r#""a": 2"#, r#""a": 1"#));
    let out = run(&cfg, &["constants"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("a must exceed 1"));
}

#[test]
fn missing_files_are_io_errors() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"domain": "mesh", "mesh_file": "absent.mesh", "a": 2}"#);
    assert_eq!(run(&cfg, &["constants"]).status.code(), Some(4));
    assert_eq!(run(&dir.path().join("nope.json"), &["eigen"]).status.code(), Some(4));
}

#[test]
fn eigen_on_rectangle_and_mesh_file() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "r.json",
        r#"{"domain": "rectangle", "lx": 2, "ly": 1, "nx": 48, "ny": 24, "a": 2}"#,
    );
    let out_dir = dir.path().join("out");
    let out = ok_json(run(&cfg, &["--out", out_dir.to_str().unwrap(), "eigen"]));
    let exact = (std::f64::consts::PI / 2.0).powi(2);
    assert!((out["mu1"].as_f64().unwrap() - exact).abs() < 0.01 * exact);
    assert_eq!(out["degenerate"], Value::Bool(false));
    let field = fs::read_to_string(out_dir.join("eigenfunction.field")).unwrap();
    assert_eq!(field.lines().count(), 49 * 25 + 1);

    write_mesh(&dir.path().join("disk.mesh"), &build_disk_mesh(3, 1.0).unwrap()).unwrap();
    let cfg = write_config(dir.path(), "d.json", r#"{"domain": "mesh", "mesh_file": "disk.mesh", "a": 2}"#);
    let out = ok_json(run(&cfg, &["eigen"]));
    assert!((out["mu1"].as_f64().unwrap() - 3.38998).abs() < 0.02 * 3.38998);
}

#[test]
fn solve_then_check() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "s.json", &square(24, r#", "eps": 0.14"#));
    for (start, kind, mean) in [("const:0", "constant", 0.0), ("const:xi", "constant", 1.2564312086261697)] {
        let out = ok_json(run(&cfg, &["solve", "--start", start]));
        assert_eq!(out["classification"]["kind"], kind);
        assert!((out["mean"].as_f64().unwrap() - mean).abs() < 1e-9);
    }
    // Short Newton steps keep an eigen-direction start on the bifurcated
    // branch instead of overshooting into the constant's basin.
    let cfg = write_config(dir.path(), "e.json", &square(24, r#", "eps": 0.14, "newton_max_step": 0.1"#));
    let out_dir = dir.path().join("sol");
    let out = ok_json(run(&cfg, &["--out", out_dir.to_str().unwrap(), "solve", "--start", "eig:0.3"]));
    assert_eq!(out["classification"]["kind"], "nonconstant");
    assert!(out_dir.join("solution.json").exists());

    let field = out_dir.join("solution.field");
    let report = ok_json(run(&cfg, &["check", "--field", field.to_str().unwrap()]));
    assert_eq!(report["all_pass"], Value::Bool(true));

    let text = fs::read_to_string(&field).unwrap();
    let truncated: String = text.lines().take(10).map(|l| format!("{l}\n")).collect();
    let bad = dir.path().join("bad.field");
    fs::write(&bad, truncated).unwrap();
    let out = run(&cfg, &["check", "--field", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("format error"));

    let zero = dir.path().join("zero.field");
    fs::write(&zero, format!("field {} epsilon 0.5 a 2\n{}", 25 * 25, "0\n".repeat(25 * 25))).unwrap();
    let report = ok_json(run(&cfg, &["check", "--field", zero.to_str().unwrap()]));
    assert_eq!(report["all_pass"], Value::Bool(true));
}

#[test]
fn solve_needs_eps_and_a_valid_start() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "s.json", &square(8, ""));
    assert_eq!(run(&cfg, &["solve"]).status.code(), Some(2));
    let cfg = write_config(dir.path(), "t.json", &square(8, r#", "eps": 1"#));
    assert_eq!(run(&cfg, &["solve", "--start", "sine:1"]).status.code(), Some(2));
}

#[test]
fn sweep_is_deterministic_across_thread_counts() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "w.json", &square(12, r#", "eps_grid": [0.1, 0.5, 10], "n_starts": 12"#));
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok_json(run(&cfg, &["--out", a.to_str().unwrap(), "--threads", "1", "sweep"]));
    ok_json(run(&cfg, &["--out", b.to_str().unwrap(), "--threads", "3", "sweep"]));
    for file in ["sweep.csv", "batch.csv", "sweep.json"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }
    let csv = fs::read_to_string(a.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.lines().last().unwrap().starts_with("10.0,2,false"));
}

#[test]
fn sweep_grid_validation() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "e.json", &square(8, r#", "eps_grid": []"#));
    assert_eq!(run(&cfg, &["sweep"]).status.code(), Some(2));
    let cfg = write_config(dir.path(), "one.json", &square(8, r#", "eps_grid": [10.0], "n_starts": 4"#));
    let out = ok_json(run(&cfg, &["sweep"]));
    assert_eq!(out["rows"].as_array().unwrap().len(), 1);
    assert_eq!(out["rows"][0]["any_nonconstant"], Value::Bool(false));
}

#[test]
fn bifurcate_reports_and_closes_the_branch() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "b.json", &square(24, ""));
    let out_dir = dir.path().join("bif");
    let out = ok_json(run(&cfg, &["--out", out_dir.to_str().unwrap(), "bifurcate"]));
    assert!(out["relative_gap"].as_f64().unwrap() < 1e-6);
    assert!(out["switch_sup_fluct"].as_f64().unwrap() > 0.01);
    assert_eq!(out["closure"]["merged_with_constant"], Value::Bool(true));
    let branch = fs::read_to_string(out_dir.join("branch.csv")).unwrap();
    assert!(branch.starts_with("epsilon,mean,sup_fluct,stability_indicator,residual_norm"));
    let report: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("bifurcation.json")).unwrap()).unwrap();
    assert_eq!(report["degenerate"], Value::Bool(true));

    let cfg = write_config(dir.path(), "bad.json", &square(8, r#", "bracket": [0.5, 0.6]"#));
    let out = run(&cfg, &["bifurcate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid bracket"));
}
