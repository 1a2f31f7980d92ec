//! End-to-end checks of the lfv binary: output shapes, exit codes, and
//! byte-stable reports.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn lfv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lfv")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("lfv-cli-tests-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn zoo_list_prints_the_six_models() {
    let out = lfv(&["zoo", "list"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let names: Vec<&str> = text.lines().collect();
    assert_eq!(
        names,
        vec![
            "minkowski",
            "de_sitter",
            "product_hyperbolic",
            "product_sphere",
            "flat_finsler",
            "perturbed_finsler"
        ]
    );
}

#[test]
fn zoo_show_emits_a_loadable_config() {
    let out = lfv(&["zoo", "show", "de_sitter"]);
    assert!(out.status.success());
    let cfg: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(cfg["dim"], 3);
    assert_eq!(cfg["name"], "de_sitter");
    assert_eq!(cfg["chart_min"].as_array().unwrap().len(), 3);
}

#[test]
fn classify_reports_class_and_orientation() {
    let out =
        lfv(&["classify", "--model", "minkowski", "--point", "0,0", "--vector", "1,0.3", "--json"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["class"], "timelike");
    assert_eq!(v["orientation"], "future");
    assert!(v["l"].as_f64().unwrap() < 0.0);
}

#[test]
fn geodesic_writes_a_csv_and_reports_tau() {
    let csv = scratch("geodesic.csv");
    let out = lfv(&[
        "geodesic",
        "--model",
        "minkowski",
        "--from",
        "0,0",
        "--to",
        "0.8,0.3",
        "--out",
        csv.to_str().unwrap(),
        "--json",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let tau = v["tau"].as_f64().unwrap();
    assert!((tau - 0.55_f64.sqrt()).abs() < 1e-9);
    let body = fs::read_to_string(&csv).unwrap();
    assert!(body.starts_with("t,x0,x1,v0,v1\n"), "missing header: {body:.40}");
}

#[test]
fn curvature_scan_finds_the_de_sitter_constant() {
    let csv = scratch("scan.csv");
    let out = lfv(&[
        "curvature-scan",
        "--model",
        "de_sitter",
        "--samples",
        "20",
        "--seed",
        "5",
        "--out",
        csv.to_str().unwrap(),
        "--json",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!((v["min_k"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    let body = fs::read_to_string(&csv).unwrap();
    assert!(body.starts_with("x0,x1,x2,v0,v1,v2,w0,w1,w2,K\n"));
}

#[test]
fn berwald_check_flags_the_perturbed_model() {
    let out = lfv(&[
        "berwald-check",
        "--model",
        "perturbed_finsler",
        "--points",
        "4",
        "--seed",
        "3",
        "--json",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["verdict"], "not_berwald");
    assert!(v["max_deviation"].as_f64().unwrap() > 1e-4);
}

#[test]
fn verify_passes_on_minkowski_and_exits_zero() {
    let out =
        lfv(&["verify", "all", "--model", "minkowski", "--seed", "42", "--budget", "quick"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("overall pass"));
}

#[test]
fn verify_witnesses_the_sphere_violation_and_exits_one() {
    let out = lfv(&[
        "verify",
        "concavity",
        "--model",
        "product_sphere",
        "--seed",
        "2026",
        "--budget",
        "quick",
        "--json",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["verdict"], "fail");
    assert!(v["checks"].as_array().unwrap().iter().all(|c| c["witness"].is_object()));
}

#[test]
fn verify_reports_are_byte_identical_across_runs() {
    let a = scratch("report_a.json");
    let b = scratch("report_b.json");
    for path in [&a, &b] {
        let out = lfv(&[
            "verify",
            "concavity",
            "--model",
            "product_sphere",
            "--seed",
            "11",
            "--budget",
            "quick",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(1));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn unknown_model_exits_two() {
    let out = lfv(&["classify", "--model", "schwarzschild", "--point", "0,0", "--vector", "1,0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn variance_demo_checks_convexity_end_to_end() {
    let mu = scratch("mu.json");
    let nu = scratch("nu.json");
    let csv = scratch("variance.csv");
    fs::write(&mu, r#"{"atoms": [[0.0, 0.0], [1.0, 0.5]], "weights": [0.5, 0.5]}"#).unwrap();
    fs::write(&nu, r#"{"atoms": [[2.0, 1.0], [3.0, -0.5]], "weights": [0.25, 0.75]}"#).unwrap();
    let out = lfv(&[
        "variance-demo",
        "--space",
        r#"{"dim":2,"norm":"euclidean"}"#,
        "--mu",
        mu.to_str().unwrap(),
        "--nu",
        nu.to_str().unwrap(),
        "--grid",
        "9",
        "--out",
        csv.to_str().unwrap(),
        "--json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["pass"], true);
    assert!(v["w2"].as_f64().unwrap() > 0.0);
    let body = fs::read_to_string(&csv).unwrap();
    assert!(body.starts_with("t,sqrt_var\n"));
    assert_eq!(body.lines().count(), 10);
}
