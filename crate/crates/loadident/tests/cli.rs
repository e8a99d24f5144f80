//! End-to-end checks of the command-line binary.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_loadident"))
}

fn case_path() -> String {
    format!("{}/cases/three_bus.json", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn simulate_writes_expected_row_count() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "simulate",
            "--case",
            &case_path(),
            "--duration",
            "20",
            "--seed",
            "5",
            "--out",
            dir.path().to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let csv = std::fs::read_to_string(dir.path().join("pmu.csv")).unwrap();
    // Header plus duration/dt_pmu + 1 samples at the default 0.02 s cadence.
    assert_eq!(csv.lines().count(), 1 + 1001);
    assert!(dir.path().join("pmu.json").exists());
    assert!(dir.path().join("run.json").exists());
}

#[test]
fn malformed_event_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "simulate",
            "--case",
            &case_path(),
            "--duration",
            "10",
            "--event",
            "5:not_a_param:0.5",
            "--out",
            dir.path().to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn event_beyond_horizon_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "simulate",
            "--case",
            &case_path(),
            "--duration",
            "10",
            "--event",
            "50:tau_g1:0.5",
            "--out",
            dir.path().to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn simulate_then_estimate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "simulate",
            "--case",
            &case_path(),
            "--duration",
            "120",
            "--seed",
            "17",
            "--out",
            dir.path().to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success());

    let result_path = dir.path().join("estimate.json");
    let out = bin()
        .args([
            "estimate",
            "--in",
            dir.path().join("pmu.csv").to_str().unwrap(),
            "--kappa",
            "10",
            "--out",
            result_path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("tau_g"), "table missing from output: {stdout}");

    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(result_path).unwrap()).unwrap();
    let tau = json["tau_g_hat"][0]["value"].as_f64().unwrap();
    assert!(tau.is_finite() && tau > 0.0);
}

#[test]
fn missing_input_is_a_runtime_error() {
    let out = bin()
        .args(["estimate", "--in", "/nonexistent/pmu.csv", "--kappa", "10"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}
