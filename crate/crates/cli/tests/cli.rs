use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn robrec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_robrec"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn csv_rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| l.split(',').map(|v| v.trim().parse().unwrap()).collect())
        .collect()
}

const GENERATE: &str = r#"{
    "generator": {"kind": "gaussian_static", "n": 2, "N": 60, "seed": 11},
    "noise": {"outlier_fraction": 0.1, "outlier_amplitude": 1000000.0, "seed": 5}
}"#;

#[test]
fn generate_then_estimate_recovers_truth() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "gen.json", GENERATE);
    let data_dir = dir.path().join("data");
    let out = robrec(&["generate", "--config", &cfg, "--out", data_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["X.csv", "Y.csv", "E.csv", "F.csv", "A0.csv", "dataset.json", "spec.json"] {
        assert!(data_dir.join(f).exists(), "{f} missing");
    }
    let sidecar: Value = serde_json::from_str(&fs::read_to_string(data_dir.join("spec.json")).unwrap()).unwrap();
    assert_eq!(sidecar["generator"]["N"], 60);
    assert_eq!(sidecar["outliers"].as_array().unwrap().len(), 6);
    assert!(sidecar["outliers"].as_array().unwrap().iter().all(|v| v.as_u64().unwrap() >= 1));

    let desc = data_dir.join("dataset.json");
    let est = robrec(&["estimate", "--data", desc.to_str().unwrap()]);
    assert_eq!(code(&est), 0, "{}", String::from_utf8_lossy(&est.stderr));
    let v = stdout_json(&est);
    assert_eq!(v["converged"], true);
    let a0 = csv_rows(&data_dir.join("A0.csv"));
    let a = v["a_star"].as_array().unwrap();
    for (i, row) in a0.iter().enumerate() {
        for (j, want) in row.iter().enumerate() {
            let got = a[i][j].as_f64().unwrap();
            assert!((got - want).abs() < 1e-6, "A[{i}][{j}] = {got}, expected {want}");
        }
    }
    let found: Vec<u64> = v["outlier_estimate"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).collect();
    let truth: Vec<u64> = sidecar["outliers"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).collect();
    assert_eq!(found, truth);
}

#[test]
fn estimate_writes_outputs_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "median.csv", "1,2,10\n\n1,1,1\n");
    let est = robrec(&["estimate", "--data", &data, "--format", "csv"]);
    assert_eq!(code(&est), 0);
    let v: f64 = String::from_utf8_lossy(&est.stdout).trim().parse().unwrap();
    assert!((v - 2.0).abs() < 1e-8);

    let out = dir.path().join("fit");
    let est = robrec(&["estimate", "--data", &data, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&est), 0);
    assert!((csv_rows(&out.join("A_star.csv"))[0][0] - 2.0).abs() < 1e-8);
    assert!(out.join("estimate.json").exists());
}

#[test]
fn certify_reports_threshold_and_curve() {
    let dir = tempfile::tempdir().unwrap();
    let x = write(dir.path(), "ones.csv", "1,1,1,1,1\n");
    let out = robrec(&["certify", "--x", &x]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert!((v["xi"].as_f64().unwrap() - 0.25).abs() < 1e-9);
    assert_eq!(v["T"], 2.5);
    assert_eq!(v["N"], 5);
    assert_eq!(v["n"], 1);
    let curve = v["bound_curve"].as_array().unwrap();
    assert_eq!(curve.len(), 3);
    assert_eq!(curve[0]["r"], 5);
    assert!(curve.iter().all(|p| p["B"].is_number()));

    let csv = robrec(&["certify", "--x", &x, "--format", "csv"]);
    let text = String::from_utf8_lossy(&csv.stdout).to_string();
    assert_eq!(text.lines().next(), Some("r,outlier_pct,B,regime"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn bound_inside_and_outside_regime() {
    let dir = tempfile::tempdir().unwrap();
    let x = write(dir.path(), "ones.csv", "1,1,1,1,1\n");
    let v = stdout_json(&robrec(&["bound", "--x", &x, "--outliers", "1"]));
    let want = 2.0 / (5f64.sqrt() * (1.0 - 1.0 / 2.5));
    assert!((v["B"].as_f64().unwrap() - want).abs() < 1e-12);
    assert_eq!(v["regime"], "stable");

    let v = stdout_json(&robrec(&["bound", "--x", &x, "--outliers", "3"]));
    assert!(v["B"].is_null());
    assert_eq!(v["regime"], "unstable");

    let v = stdout_json(&robrec(&["bound", "--x", &x, "--outliers", "0", "--sigma", "5"]));
    assert!((v["B"].as_f64().unwrap() - 0.4).abs() < 1e-12);
}

const EXPERIMENT: &str = r#"{
    "generator": {"kind": "gaussian_static", "n": 2, "N": 80, "seed": 3},
    "sweep": [
        {"outlier_fraction": 0.0, "dense_bound": 0.05, "seed": 1},
        {"outlier_fraction": 0.05, "dense_bound": 0.05, "seed": 2}
    ],
    "trials": 4
}"#;

#[test]
fn experiments_emit_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "exp.json", EXPERIMENT);

    let out = robrec(&["experiment", "stability", "--config", &cfg]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["violations"], 0);
    assert_eq!(v["points"].as_array().unwrap().len(), 2);

    let curve = robrec(&["experiment", "bound-curve", "--config", &cfg, "--format", "csv"]);
    assert_eq!(code(&curve), 0);
    let text = String::from_utf8_lossy(&curve.stdout).to_string();
    assert_eq!(
        text.lines().next(),
        Some("outlier_pct,bound,mean_err,max_err,recovery_rate,xi,T,sigma_lb")
    );

    let report_dir = dir.path().join("reports");
    let out = robrec(&[
        "experiment",
        "bound-curve",
        "--config",
        &cfg,
        "--out",
        report_dir.to_str().unwrap(),
        "--seed",
        "9",
    ]);
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_str(&fs::read_to_string(report_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(v["config"]["generator"]["seed"], 9);
    assert_eq!(v["config"]["sweep"][1]["seed"], 11);
}

#[test]
fn invalid_input_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad_json = write(dir.path(), "bad.json", "{ not json");
    let no_trials = write(dir.path(), "zero.json", &EXPERIMENT.replace("\"trials\": 4", "\"trials\": 0"));
    let unknown = write(
        dir.path(),
        "unknown.json",
        r#"{"generator": {"kind": "gaussian_static", "n": 2, "N": 10}, "nosie": {}}"#,
    );
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();
    assert_eq!(code(&robrec(&["experiment", "recovery", "--config", &bad_json])), 2);
    assert_eq!(code(&robrec(&["experiment", "recovery", "--config", &no_trials])), 2);
    assert_eq!(code(&robrec(&["generate", "--config", &unknown, "--out", out])), 2);
    // dense noise is not allowed in a recovery sweep
    let cfg = write(dir.path(), "exp.json", EXPERIMENT);
    assert_eq!(code(&robrec(&["experiment", "recovery", "--config", &cfg])), 2);
    assert_eq!(code(&robrec(&["certify", "--x", "/nonexistent/x.csv"])), 2);
    assert_eq!(code(&robrec(&["bound", "--x", "/nonexistent/x.csv", "--outliers", "1"])), 2);
    assert_eq!(code(&robrec(&["experiment", "sideways", "--config", &cfg])), 2);
}

#[test]
fn rank_deficiency_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let x = write(dir.path(), "flat.csv", "1,2,3,4\n2,4,6,8\n");
    let out = robrec(&["certify", "--x", &x]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("rank"));
}

#[test]
fn violated_bound_exits_with_4() {
    // One splitting step from the least-squares start leaves the estimate
    // dragged by the outliers, far outside the guaranteed error.
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "early.json",
        r#"{
            "generator": {"kind": "gaussian_static", "n": 2, "N": 80, "seed": 3},
            "sweep": [{"outlier_fraction": 0.05, "dense_bound": 0.01, "seed": 2}],
            "solver": {"max_iter": 1, "polish": false},
            "trials": 2
        }"#,
    );
    let out = robrec(&["experiment", "stability", "--config", &cfg]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout_json(&out)["violations"].as_u64().unwrap() > 0);
}
