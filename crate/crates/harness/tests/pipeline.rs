//! Config, run, sweep and report plumbing on small runs.

use std::fs;

use fracdual_harness::record::{RunRecord, Status, RECORD_FILE};
use fracdual_harness::{experiments, report, sweep, ExperimentConfig, ExperimentId};
use serde_json::{json, Value};

fn small_duality(dir: &std::path::Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::preset(ExperimentId::Duality);
    cfg.grid = fracdual_core::GridSpec::new(1, 128, 1.0).unwrap();
    cfg.solver.horizon = 0.05;
    cfg.output_dir = dir.to_path_buf();
    cfg
}

#[test]
fn zero_drift_duality_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_duality(dir.path())
        .with_override("velocity.amplitude", json!(0.0))
        .unwrap()
        .with_override("velocity.sink_strength", json!(0.0))
        .unwrap();
    let rec = experiments::run(&cfg).unwrap();
    assert!(rec.passed());
    for n in [128, 256] {
        let e = rec.fitted[&format!("rel_error_n{n}")];
        assert!(e <= 1e-10, "rel_error {e:e} at N = {n}");
    }
}

#[test]
fn run_creates_output_dir_and_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a").join("b");
    let rec = experiments::run(&small_duality(&out)).unwrap();
    let loaded = RunRecord::load(&out.join(RECORD_FILE)).unwrap();
    assert_eq!(loaded.verdicts, rec.verdicts);
    assert_eq!(loaded.experiment(), "duality");
}

#[test]
fn unknown_override_path_is_refused() {
    let cfg = ExperimentConfig::preset(ExperimentId::Duality);
    assert!(cfg.with_override("solver.no_such_field", json!(1)).is_err());
    assert!(cfg.with_override("nowhere.alpha", json!(1)).is_err());
}

#[test]
fn sweep_with_invalid_axis_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_duality(dir.path());
    let values = sweep::parse_values("1,2");
    assert!(sweep::sweep(&cfg, "solver.not_a_field", &values, 1).is_err());
    assert!(sweep::sweep(&cfg, "solver.alpha", &[], 1).is_err());
}

#[test]
fn parse_values_keeps_json_and_strings() {
    let v = sweep::parse_values("0.5, 2, divergence_free,");
    assert_eq!(
        v,
        vec![
            json!(0.5),
            json!(2),
            Value::String("divergence_free".into())
        ]
    );
}

#[test]
fn sweep_writes_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_duality(dir.path());
    let values = sweep::parse_values("0.8,1.2");
    let records = sweep::sweep(&cfg, "solver.alpha", &values, 2).unwrap();
    assert_eq!(records.len(), 2);
    assert_eq!(records[0].config["solver"]["alpha"], json!(0.8));
    assert_eq!(records[1].config["solver"]["alpha"], json!(1.2));
    let collected = report::collect(dir.path()).unwrap();
    assert_eq!(collected.len(), 2);
    let files = report::report(&collected, dir.path()).unwrap();
    let mut reader = csv::Reader::from_path(&files.csv).unwrap();
    assert_eq!(reader.records().count(), 2);
}

fn csv_without_wall_clock(path: &std::path::Path) -> Vec<Vec<String>> {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let headers = reader.headers().unwrap().clone();
    let keep: Vec<usize> = (0..headers.len())
        .filter(|&i| &headers[i] != "wall_clock_seconds")
        .collect();
    let mut rows = vec![keep.iter().map(|&i| headers[i].to_string()).collect()];
    for row in reader.records() {
        let row = row.unwrap();
        rows.push(keep.iter().map(|&i| row[i].to_string()).collect());
    }
    rows
}

#[test]
fn single_record_report_is_reproducible() {
    let mut tables = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        experiments::run(&small_duality(dir.path())).unwrap();
        let records = report::collect(dir.path()).unwrap();
        assert_eq!(records.len(), 1);
        let files = report::report(&records, dir.path()).unwrap();
        assert!(files.json.exists());
        tables.push(csv_without_wall_clock(&files.csv));
    }
    assert_eq!(tables[0].len(), 2);
    assert_eq!(tables[0], tables[1]);
}

#[test]
fn threshold_sweep_without_sink_passes() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::preset(ExperimentId::ThresholdSweep);
    cfg.grid = fracdual_core::GridSpec::new(2, 32, 4.0).unwrap();
    cfg.solver.horizon = 0.1;
    cfg.output_dir = dir.path().to_path_buf();
    let cfg = cfg
        .with_override("params.sink_factors", json!([0.0]))
        .unwrap()
        .with_override("params.steps", json!(20))
        .unwrap()
        .with_override("params.sobolev.max_iters", json!(50))
        .unwrap();
    let rec = experiments::run(&cfg).unwrap();
    let v = rec
        .verdicts
        .iter()
        .find(|v| v.name == "energy_inequality_f0")
        .unwrap();
    assert_eq!(v.status, Status::Pass, "{}", v.detail);
}

#[test]
fn config_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    fs::write(&path, r#"{"experiment": "riccati", "seed": 7}"#).unwrap();
    let cfg = ExperimentConfig::load(&path).unwrap();
    assert_eq!(cfg.seed, 7);
    assert_eq!(
        cfg.grid,
        ExperimentConfig::preset(ExperimentId::Riccati).grid
    );
    let back = ExperimentConfig::from_value(cfg.to_value().unwrap()).unwrap();
    assert_eq!(back.to_value().unwrap(), cfg.to_value().unwrap());
}
