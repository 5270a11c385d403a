//! End-to-end tests of the command-line interface and its exit codes.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_parweyl"))
}

fn write_template(dir: &Path, which: &str) -> std::path::PathBuf {
    let path = dir.join(format!("{which}.json"));
    let out = bin()
        .args(["family", which, "--out"])
        .arg(&path)
        .output()
        .expect("run family");
    assert!(out.status.success(), "family template emission failed");
    assert!(path.exists());
    path
}

#[test]
fn verify_on_shipped_d1_fixture_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_template(dir.path(), "d1");
    let report = dir.path().join("out.json");
    let out = bin()
        .args(["verify", "--config"])
        .arg(&cfg)
        .args(["--seed", "7", "--samples", "15", "--report"])
        .arg(&report)
        .output()
        .expect("run verify");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "expected exit 0, stdout:\n{stdout}");
    assert!(stdout.contains("overall: PASS"));
    assert!(report.exists());
    let text = std::fs::read_to_string(&report).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(parsed["overall_pass"], serde_json::Value::Bool(true));
}

#[test]
fn verify_on_shipped_d2_fixture_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_template(dir.path(), "d2");
    let out = bin()
        .args(["verify", "--config"])
        .arg(&cfg)
        .args(["--samples", "10"])
        .output()
        .expect("run verify");
    assert!(
        out.status.success(),
        "stdout:\n{}",
        String::from_utf8_lossy(&out.stdout)
    );
}

#[test]
fn identical_runs_produce_byte_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_template(dir.path(), "d1");
    let mut bytes = Vec::new();
    for name in ["a.json", "b.json"] {
        let report = dir.path().join(name);
        let out = bin()
            .args(["verify", "--config"])
            .arg(&cfg)
            .args(["--seed", "21", "--samples", "8", "--report"])
            .arg(&report)
            .output()
            .expect("run verify");
        assert!(out.status.success());
        bytes.push(std::fs::read(&report).unwrap());
    }
    assert_eq!(bytes[0], bytes[1], "reports must be byte-identical");
}

#[test]
fn missing_config_exits_2_and_names_the_path() {
    let out = bin()
        .args(["verify", "--config", "/nonexistent/nowhere.json"])
        .output()
        .expect("run verify");
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("nowhere.json"), "stderr: {stderr}");
}

#[test]
fn inadmissible_operator_exits_2_and_names_the_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_template(dir.path(), "d1");
    let text = std::fs::read_to_string(&cfg)
        .unwrap()
        .replace("[1.0, 0.0, 0.0, -1.0]", "[1.0, 0.0, 0.0, 1.0]");
    std::fs::write(&cfg, text).unwrap();
    let out = bin()
        .args(["verify", "--config"])
        .arg(&cfg)
        .output()
        .expect("run verify");
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("traceless"), "stderr: {stderr}");
}

#[test]
fn failing_check_exits_1() {
    // Custom flat metric with an expected fiber dimension that is wrong.
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(
        &cfg,
        r#"{
            "family": "custom",
            "params": {
                "n": 4,
                "components": {
                    "0,0": [{"powers": [0,0,0,0], "coeff": -1.0}],
                    "1,1": [{"powers": [0,0,0,0], "coeff": 1.0}],
                    "2,2": [{"powers": [0,0,0,0], "coeff": 1.0}],
                    "3,3": [{"powers": [0,0,0,0], "coeff": 1.0}]
                },
                "domain": [[-1.0,1.0],[-1.0,1.0],[-1.0,1.0],[-1.0,1.0]],
                "expected_d": 2
            },
            "samples": 3,
            "box": [[-0.9,0.9],[-0.9,0.9],[-0.9,0.9],[-0.9,0.9]],
            "seed": 3
        }"#,
    )
    .unwrap();
    let out = bin().args(["verify", "--config"]).arg(&cfg).output().expect("run verify");
    assert_eq!(out.status.code(), Some(1), "flat metric has d = 4, not 2");
}

#[test]
fn pullback_subcommand_runs_the_grid_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_template(dir.path(), "d1");
    // shrink the grid so the test stays quick
    let text = std::fs::read_to_string(&cfg)
        .unwrap()
        .replace(r#""t_values": [-0.3, 0.0, 0.3]"#, r#""t_values": [0.2]"#)
        .replace(r#""s_values": [-0.3, 0.0, 0.3]"#, r#""s_values": [0.1]"#)
        .replace(r#""psi_values": [-0.3, 0.0, 0.3]"#, r#""psi_values": [0.2]"#);
    std::fs::write(&cfg, text).unwrap();
    let out = bin()
        .args(["pullback", "--config"])
        .arg(&cfg)
        .output()
        .expect("run pullback");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "stdout:\n{stdout}");
    assert!(stdout.contains("pullback"));
}
