//! End-to-end checks of the command-line binary: exit codes, output files,
//! and the generate/solve round trip.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tornado-plan"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn geomcheck_detects_the_uncoverable_triangle() {
    let out = run(&[
        "geomcheck", "--point", "0,0", "--point", "4,0", "--point", "2,1.1", "--delta", "1",
        "--length", "2",
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).trim() == "infeasible", "got {:?}", stdout(&out));

    let out = run(&[
        "geomcheck", "--point", "0,0", "--point", "4,0", "--point", "2,1.1", "--delta", "1",
        "--length", "inf",
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).starts_with("feasible"), "got {:?}", stdout(&out));
}

#[test]
fn config_errors_exit_with_code_two() {
    let out = run(&["geomcheck", "--point", "0,0", "--delta", "1", "--length", "nope"]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["geomcheck", "--point", "zero", "--delta", "1", "--length", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn generate_then_solve_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let instance = dir.path().join("instance.json");
    let out = run(&[
        "gen",
        "--blocks",
        root.join("data/blocks.example.csv").to_str().unwrap(),
        "--fragility",
        root.join("data/fragility.example.json").to_str().unwrap(),
        "-k",
        "5",
        "--budget",
        "300000",
        "--delta",
        "0.4",
        "--length",
        "2.5",
        "--out",
        instance.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(instance.is_file());

    let solve_dir = dir.path().join("solve");
    let out = run(&[
        "solve",
        "--instance",
        instance.to_str().unwrap(),
        "--out",
        solve_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for file in ["report.json", "bounds.csv", "plan.geojson"] {
        assert!(solve_dir.join(file).is_file(), "missing {file}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(solve_dir.join("report.json")).unwrap())
            .unwrap();
    assert!(report["v"].as_f64().unwrap() >= 0.0);
    assert_eq!(report["plan"].as_array().unwrap().len(), 5);

    let out = run(&[
        "subproblem",
        "--instance",
        instance.to_str().unwrap(),
        "--strategies",
        "0,0,0,0,0",
    ]);
    assert!(out.status.success());
    let sub: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(sub["phi"].as_f64().unwrap() >= 0.0);

    let out = run(&["simulate", "--instance", instance.to_str().unwrap(), "-n", "20"]);
    assert!(out.status.success());
    assert!(stdout(&out).starts_with("average,maximum,minimum"));
}

#[test]
fn strategy_index_out_of_range_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let instance = dir.path().join("instance.json");
    let out = run(&[
        "gen",
        "--blocks",
        root.join("data/blocks.example.csv").to_str().unwrap(),
        "--fragility",
        root.join("data/fragility.example.json").to_str().unwrap(),
        "-k",
        "3",
        "--budget",
        "100000",
        "--delta",
        "0.4",
        "--length",
        "inf",
        "--out",
        instance.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let out = run(&[
        "subproblem",
        "--instance",
        instance.to_str().unwrap(),
        "--strategies",
        "0,9,0",
    ]);
    assert_eq!(out.status.code(), Some(2));
}
