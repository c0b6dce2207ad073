use std::path::Path;
use std::process::{Command, Output};

fn gpsens(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gpsens")).args(args).output().expect("binary runs")
}

fn data_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().filter(|l| !l.starts_with('#')).skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn error_kind(out: &Output) -> String {
    let v: serde_json::Value = serde_json::from_slice(&out.stderr).expect("error JSON on stderr");
    v["error"]["kind"].as_str().unwrap().to_string()
}

fn simulate_to(path: &Path, n: &str, seed: &str) {
    let out = gpsens(&["simulate", "--n", n, "--seed", seed, "--out", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn figure1_anchor_rows() {
    let out = gpsens(&["figure1"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# gpsens "));
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 61 * 4);
    let find = |g: &str, p: &str| rows.iter().find(|r| r[0] == "0" && r[1] == g && r[2] == p).unwrap().clone();
    let num = |s: &str| s.parse::<f64>().unwrap();
    let m = find("2.00000000000", "maximal");
    assert!((num(&m[3]) - 1.0 / 6.0).abs() < 1e-6 && (num(&m[4]) - 1.0 / 6.0).abs() < 1e-6);
    let p = find("2.00000000000", "pure");
    assert!((num(&p[3]) - (1.0 / 6.0 - 2.0 / 3.0)).abs() < 1e-6);
    assert!((num(&p[4]) - (1.0 / 6.0 + 2.0 / 3.0)).abs() < 1e-6);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    simulate_to(&a, "300", "7");
    simulate_to(&b, "300", "7");
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let t1 =
        gpsens(&["truth", "--model", "outcome-gap", "--gamma", "2", "--policy", "maximal", "--delta-grid", "0:1:0.25"]);
    let t2 =
        gpsens(&["truth", "--model", "outcome-gap", "--gamma", "2", "--policy", "maximal", "--delta-grid", "0:1:0.25"]);
    assert!(t1.status.success());
    assert_eq!(t1.stdout, t2.stdout);
    assert_eq!(data_rows(&String::from_utf8(t1.stdout).unwrap()).len(), 5);
}

#[test]
fn estimate_collapses_at_zero() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    simulate_to(&data, "1000", "3");
    let out = gpsens(&[
        "estimate",
        "--data",
        data.to_str().unwrap(),
        "--delta",
        "0",
        "--gamma",
        "2",
        "--model",
        "outcome-gap",
        "--policy",
        "maximal",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let r = &v["report"];
    assert_eq!(r["lower"], r["tau_hat"]);
    assert_eq!(r["upper"], r["tau_hat"]);
    assert_eq!(v["config"]["folds"], 5);
    assert_eq!(v["config"]["level"], 0.95);
}

#[test]
fn estimate_writes_report_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    let report = dir.path().join("r.json");
    simulate_to(&data, "1000", "4");
    let out = gpsens(&[
        "estimate",
        "--data",
        data.to_str().unwrap(),
        "--delta",
        "1",
        "--gamma",
        "2",
        "--model",
        "odds-ratio",
        "--policy",
        "maximal",
        "--knn-k",
        "40",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    let r = &v["report"];
    assert!(r["lower"].as_f64().unwrap() <= r["upper"].as_f64().unwrap());
    assert_eq!(v["config"]["regressor"]["k"], 40);
}

#[test]
fn exit_codes_follow_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    simulate_to(&data, "500", "5");
    let d = data.to_str().unwrap();

    let out = gpsens(&["estimate", "--data", d, "--delta", "1", "--model", "outcome-gap", "--policy", "pure"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_kind(&out), "config");

    let out = gpsens(&[
        "estimate",
        "--data",
        d,
        "--delta",
        "1",
        "--model",
        "outcome-gap",
        "--policy",
        "maximal",
        "--level",
        "1.5",
    ]);
    assert_eq!(out.status.code(), Some(2));

    let out = gpsens(&["truth", "--model", "outcome-gap", "--policy", "maximal", "--delta-grid", "1:0:0.1"]);
    assert_eq!(out.status.code(), Some(2));

    let out = gpsens(&["simulate", "--design", "unknown"]);
    assert_eq!(out.status.code(), Some(2));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "x1,a,y\n0.1,0.5,1\n0.2,1,1\n").unwrap();
    let out = gpsens(&[
        "estimate",
        "--data",
        bad.to_str().unwrap(),
        "--delta",
        "1",
        "--model",
        "outcome-gap",
        "--policy",
        "maximal",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_kind(&out), "data");

    let missing = dir.path().join("missing.csv");
    let out = gpsens(&[
        "estimate",
        "--data",
        missing.to_str().unwrap(),
        "--delta",
        "1",
        "--model",
        "outcome-gap",
        "--policy",
        "maximal",
    ]);
    assert_eq!(out.status.code(), Some(3));

    let out = gpsens(&["truth", "--model", "odds-ratio", "--gamma", "0.5", "--policy", "maximal", "--delta", "1"]);
    assert_eq!(out.status.code(), Some(2));
}
