//! End-to-end checks of the `traywalk` binary.

use std::fs;
use std::path::Path;
use std::process::Command;

use traywalk_sim::logio::RunLog;
use traywalk_sim::scenario::Scenario;

fn traywalk() -> Command {
    Command::new(env!("CARGO_BIN_EXE_traywalk"))
}

fn short_crossing(dir: &Path) -> std::path::PathBuf {
    let mut s = Scenario::manway_crossing();
    s.planner.duration = 5.0;
    let path = dir.join("scenario.toml");
    fs::write(&path, s.to_toml_string()).unwrap();
    path
}

#[test]
fn run_validate_emit_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let scenario_path = short_crossing(dir.path());
    let out = dir.path().join("out");

    let status = traywalk()
        .arg("run")
        .arg(&scenario_path)
        .args(["--plant", "kinematic", "--seed", "7"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    for name in ["log.json", "base.csv", "footholds.csv", "summary.json"] {
        assert!(out.join(name).exists(), "{name} missing");
    }
    let log = RunLog::read_json(&out.join("log.json")).unwrap();
    assert_eq!(log.seed, 7);
    let base = fs::read_to_string(out.join("base.csv")).unwrap();
    assert_eq!(base.lines().count(), 1 + log.summary.ticks);

    let status = traywalk().arg("validate").arg(out.join("log.json")).status().unwrap();
    assert!(status.success());

    let emitted = dir.path().join("emitted");
    let status = traywalk()
        .arg("emit")
        .arg(out.join("log.json"))
        .args(["--format", "csv"])
        .arg("--out")
        .arg(&emitted)
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(
        fs::read(out.join("base.csv")).unwrap(),
        fs::read(emitted.join("base.csv")).unwrap()
    );
    assert_eq!(
        fs::read(out.join("footholds.csv")).unwrap(),
        fs::read(emitted.join("footholds.csv")).unwrap()
    );
}

#[test]
fn validate_rejects_corrupted_log() {
    let dir = tempfile::tempdir().unwrap();
    let scenario_path = short_crossing(dir.path());
    let out = dir.path().join("out");
    let status = traywalk().arg("run").arg(&scenario_path).arg("--out").arg(&out).status().unwrap();
    assert!(status.success());

    let log_path = out.join("log.json");
    let mut log = RunLog::read_json(&log_path).unwrap();
    assert!(!log.footholds.is_empty());
    log.footholds[0].safe = log.scenario.manway.center;
    log.write_json(&log_path).unwrap();

    let output = traywalk().arg("validate").arg(&log_path).output().unwrap();
    assert!(!output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("unsafe_foothold"), "stdout: {stdout}");
}

#[test]
fn run_rejects_invalid_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "schema_version = 99\nname = \"x\"\n").unwrap();
    let output = traywalk().arg("run").arg(&path).output().unwrap();
    assert!(!output.status.success());
}

#[test]
fn shipped_configs_run_through_cli() {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("hold");
    let status =
        traywalk().arg("run").arg(configs.join("standing_hold.toml")).arg("--out").arg(&out).status().unwrap();
    assert!(status.success());
    let log = RunLog::read_json(&out.join("log.json")).unwrap();
    assert_eq!(log.summary.replan_count, 0);
    assert!(!log.summary.aborted);
}
