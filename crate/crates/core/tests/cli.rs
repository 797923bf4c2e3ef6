//! End-to-end runs of the `posekit` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn posekit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_posekit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

const IDENTITY_ROW: &str = "1 0 0 0 0 1 0 0 0 0 1 0\n";

fn write_traj(dir: &Path, name: &str, rows: &[String]) -> String {
    let path = dir.join(name);
    std::fs::write(&path, rows.concat()).unwrap();
    path.to_str().unwrap().to_string()
}

fn translated(n: usize, dx: f64) -> Vec<String> {
    (0..n)
        .map(|i| format!("1 0 0 {} 0 1 0 0 0 0 1 0\n", i as f64 + dx))
        .collect()
}

#[test]
fn convert_quat_to_euler() {
    let out = posekit(&["convert", "--from", "quat", "--to", "euler", "--values", "1,0,0,0"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["to"], "euler");
    assert_eq!(v["values"], serde_json::json!([0.0, 0.0, 0.0]));
}

#[test]
fn dist_geodesic_quarter_turn() {
    let out = posekit(&[
        "dist", "--kind", "geodesic", "--rep", "axis", "--a", "identity", "--b", "0,0,1.5707963267948966",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out)["value"].as_f64().unwrap();
    assert!((v - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(posekit(&[]).status.code(), Some(1));
    assert_eq!(posekit(&["dist", "--kind", "nope", "--a", "identity", "--b", "identity"]).status.code(), Some(1));
    assert_eq!(posekit(&["--help"]).status.code(), Some(0));
}

#[test]
fn eval_reports_length_mismatch_with_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let gt = write_traj(dir.path(), "gt.txt", &translated(5, 0.0));
    let est = write_traj(dir.path(), "est.txt", &translated(4, 0.0));
    let out = posekit(&["eval", "--gt", &gt, "--est", &est, "--metric", "ape", "--mode", "trans"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("5"));
}

#[test]
fn eval_reports_malformed_line_with_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let gt = write_traj(dir.path(), "gt.txt", &[IDENTITY_ROW.into(), "1 0 0\n".into()]);
    let out = posekit(&["eval", "--gt", &gt, "--est", &gt, "--metric", "rpe", "--mode", "rot"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn eval_ape_of_shifted_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let gt = write_traj(dir.path(), "gt.txt", &translated(10, 0.0));
    let est = write_traj(dir.path(), "est.txt", &translated(10, 0.5));
    let per_frame = dir.path().join("frames.csv");
    let out = posekit(&[
        "eval", "--gt", &gt, "--est", &est, "--metric", "ape", "--mode", "trans",
        "--per-frame", per_frame.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    let rmse = v["stats"]["rmse"].as_f64().or_else(|| v["rmse"].as_f64()).unwrap();
    assert!((rmse - 0.5).abs() < 1e-12);
    let csv = std::fs::read_to_string(per_frame).unwrap();
    assert!(csv.starts_with("index,error"));
    assert_eq!(csv.lines().count(), 11);
}

#[test]
fn seeded_runs_are_byte_identical() {
    let args = ["axioms", "--kind", "quat", "--trials", "300", "--seed", "5"];
    let (a, b) = (posekit(&args), posekit(&args));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);

    let fit = ["fit", "--loss", "se3", "--steps", "50", "--seed", "2"];
    let (a, b) = (posekit(&fit), posekit(&fit));
    assert!(a.status.success());
    assert!(String::from_utf8_lossy(&a.stdout).starts_with("kind,trial,step,loss,rot_err_rad,trans_err_m"));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn compare_writes_table_and_traces() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("cmp.json");
    let out = posekit(&[
        "compare", "--trials", "2", "--steps", "100", "--out", table.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&table).unwrap()).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 3);
    for kind in ["original", "quat", "se3"] {
        let trace = dir.path().join(format!("cmp.{kind}.csv"));
        assert!(trace.exists(), "missing {}", trace.display());
    }
}
