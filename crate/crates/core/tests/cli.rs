use std::path::Path;
use std::process::{Command, Output};

use approx::assert_abs_diff_eq;

fn ib(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ib-abp"))
        .args(args)
        .env("IB_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Data rows of a CSV with a leading `#` metadata line.
fn rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let body = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, body)
}

fn num(field: &str) -> f64 {
    field.parse().unwrap()
}

#[test]
fn solve_ri_reports_json() {
    let out = ib(&["solve-ri", "--model", "bernoulli", "--target-i", "0.062566", "--no-trajectories"]);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["mode"], "RI");
    assert_abs_diff_eq!(json["value"].as_f64().unwrap(), 0.130812, epsilon = 5e-4);
    assert_eq!(json["objective_trajectory"].as_array().unwrap().len(), 0);
}

#[test]
fn solve_ir_writes_trajectory_files() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("ir.json");
    let csv = dir.path().join("traj.csv");
    let svg = dir.path().join("res.svg");
    let out = ib(&[
        "solve-ir",
        "--model",
        "bernoulli",
        "--target-r",
        "0.130812",
        "--out",
        json.to_str().unwrap(),
        "--trajectory-csv",
        csv.to_str().unwrap(),
        "--residual-svg",
        svg.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_abs_diff_eq!(report["value"].as_f64().unwrap(), 0.062566, epsilon = 1e-3);
    let iterations = report["iterations"].as_u64().unwrap() as usize;
    let traj = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(traj.lines().count(), iterations + 1);
    assert!(std::fs::read_to_string(&svg).unwrap().contains("<polyline"));
}

#[test]
fn oracle_gaussian_grid() {
    let out = ib(&["oracle", "--model", "gaussian", "--i-grid", "0.04:0.20:5"]);
    assert_eq!(out.status.code(), Some(0));
    let (header, body) = rows(&stdout(&out));
    assert_eq!(header, ["i", "r"]);
    assert_eq!(body.len(), 5);
    assert_abs_diff_eq!(num(&body[0][1]), 0.083480, epsilon = 1e-6);
    assert_abs_diff_eq!(num(&body[4][0]), 0.20, epsilon = 1e-12);
}

#[test]
fn sweep_zero_target_and_reproducibility() {
    let args = ["sweep", "--model", "bernoulli", "--targets", "0,0.1,0.2", "--no-timing"];
    let first = ib(&args);
    assert_eq!(first.status.code(), Some(0));
    let (header, body) = rows(&stdout(&first));
    assert_eq!(
        header,
        ["target", "value", "i_tx", "i_ty", "lambda", "iterations", "converged", "residual", "wall_time_ms"]
    );
    assert_eq!(body.len(), 3);
    assert_eq!((num(&body[0][1]), num(&body[0][4])), (0.0, 0.0));
    assert!(body.iter().all(|r| r[6] == "true"));
    assert_eq!(first.stdout, ib(&args).stdout);
}

#[test]
fn sweep_writes_plot() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let svg = dir.path().join("plane.svg");
    let out = ib(&[
        "sweep",
        "--model",
        "bernoulli",
        "--mode",
        "ir",
        "--grid",
        "0.05:0.3:4",
        "--out",
        csv.to_str().unwrap(),
        "--svg",
        svg.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("# ib-abp sweep mode=Ir") && text.contains("generated_unix="));
    assert_eq!(rows(&text).1.len(), 4);
    let plot = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(plot.matches("<circle").count(), 4);
}

#[test]
fn bench_rows_per_algorithm() {
    let out = ib(&["bench", "--model", "bernoulli", "--targets", "0.1", "--no-timing"]);
    assert_eq!(out.status.code(), Some(0));
    let (header, body) = rows(&stdout(&out));
    assert_eq!(header[..3], ["algorithm", "target", "value"]);
    assert_eq!(body.iter().map(|r| r[0].as_str()).collect::<Vec<_>>(), ["ABP", "BA"]);
    assert_abs_diff_eq!(num(&body[0][2]), num(&body[1][2]), epsilon = 1e-3);
}

#[test]
fn exit_codes() {
    assert_eq!(ib(&["solve-ri", "--model", "bernoulli", "--target-i", "0.5"]).status.code(), Some(1));
    assert_eq!(ib(&["sweep", "--model", "bernoulli", "--targets", "0.2,0.1"]).status.code(), Some(3));
    assert_eq!(ib(&["solve-ri", "--target-i", "0.1"]).status.code(), Some(3));
    assert_eq!(ib(&["frobnicate"]).status.code(), Some(3));
    assert_eq!(ib(&["--help"]).status.code(), Some(0));
    let missing = ib(&["solve-ri", "--problem", "/nonexistent/p.json", "--target-i", "0.1"]);
    assert_eq!(missing.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("/nonexistent/p.json"));
}

#[test]
fn ingest_then_solve_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let problem = dir.path().join("iris.json");
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/iris.csv");
    let out = ib(&["ingest", "--samples", data.to_str().unwrap(), "--unit", "1", "--out", problem.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("150 samples -> 27 occupied bins, 3 labels"));

    let out = ib(&["solve-ri", "--problem", problem.to_str().unwrap(), "--target-i", "0.5", "--no-trajectories"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_abs_diff_eq!(json["i_ty"].as_f64().unwrap(), 0.5, epsilon = 1e-6);
}
