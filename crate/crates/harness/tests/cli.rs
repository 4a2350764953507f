//! The `fracdual` binary: exit codes and refusals.

use std::fs;
use std::process::Command;

fn fracdual() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fracdual"))
}

#[test]
fn unknown_experiment_id_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    fs::write(&path, r#"{"experiment": "no_such_experiment"}"#).unwrap();
    let out = fracdual()
        .args(["run", "--config"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no_such_experiment"));
}

#[test]
fn unknown_config_key_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    fs::write(&path, r#"{"experiment": "duality", "solver": {"alfa": 1}}"#).unwrap();
    let out = fracdual()
        .args(["run", "--config"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn passing_run_exits_zero_and_report_summarizes_it() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    let out_dir = dir.path().join("run");
    let doc = serde_json::json!({
        "experiment": "cordoba",
        "output_dir": out_dir,
        "params": {"samples": 2}
    });
    fs::write(&path, doc.to_string()).unwrap();
    let out = fracdual()
        .args(["run", "--config"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let out = fracdual()
        .args(["report", "--dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("summary.csv").exists());
}

#[test]
fn failing_run_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    let doc = serde_json::json!({
        "experiment": "duality",
        "output_dir": dir.path().join("run"),
        "grid": {"points": 64},
        "solver": {"horizon": 0.05},
        "params": {"tolerance": -1.0}
    });
    fs::write(&path, doc.to_string()).unwrap();
    let out = fracdual()
        .args(["run", "--config"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}
