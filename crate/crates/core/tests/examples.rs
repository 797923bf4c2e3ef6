//! Runs the quick examples, which `cargo test` builds next to the binary.

use std::path::PathBuf;
use std::process::Command;

fn run_example(name: &str) -> String {
    let bin = PathBuf::from(env!("CARGO_BIN_EXE_posekit"));
    let path = bin.parent().unwrap().join("examples").join(name);
    let out = Command::new(&path)
        .output()
        .unwrap_or_else(|e| panic!("cannot run {}: {e}", path.display()));
    assert!(out.status.success(), "{name} failed:\n{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn conversions_example_runs() {
    assert!(run_example("conversions").contains("gimbal lock"));
}

#[test]
fn distances_example_runs() {
    assert!(run_example("distances").contains("chordal-se3"));
}

#[test]
fn losses_example_runs() {
    assert!(run_example("losses").contains("relative error"));
}

#[test]
fn trajectory_example_runs() {
    assert!(run_example("trajectory").contains("APE"));
}
