//! Summary tables over persisted run records.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use crate::record::{RunRecord, Status, RECORD_FILE};

/// Every `record.json` below `dir`, in path order.
pub fn collect(dir: &Path) -> Result<Vec<(PathBuf, RunRecord)>> {
    let mut found = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        let entries = fs::read_dir(&d).with_context(|| format!("listing {}", d.display()))?;
        for entry in entries {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().is_some_and(|n| n == RECORD_FILE) {
                found.push(path);
            }
        }
    }
    found.sort();
    found
        .into_iter()
        .map(|p| {
            let rec = RunRecord::load(&p)?;
            let run = p
                .parent()
                .and_then(|q| q.strip_prefix(dir).ok())
                .map(|q| q.display().to_string())
                .filter(|s| !s.is_empty())
                .unwrap_or_else(|| ".".into());
            Ok((PathBuf::from(run), rec))
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct RunSummary<'a> {
    run: String,
    experiment: &'a str,
    passed: bool,
    verdicts: &'a [crate::record::Verdict],
    fitted: &'a std::collections::BTreeMap<String, f64>,
    steps: usize,
    wall_clock_seconds: f64,
}

pub struct ReportFiles {
    pub csv: PathBuf,
    pub json: PathBuf,
    pub series: Vec<PathBuf>,
}

fn config_field(rec: &RunRecord, path: &[&str]) -> String {
    let mut v = &rec.config;
    for key in path {
        v = &v[*key];
    }
    match v {
        serde_json::Value::Null => String::new(),
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn fmt(x: f64) -> String {
    format!("{x:e}")
}

fn safe(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "._-=".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Writes `summary.csv` (one row per run), `summary.json`, and one
/// plot-ready CSV per recorded series under `series/`.
pub fn report(records: &[(PathBuf, RunRecord)], out: &Path) -> Result<ReportFiles> {
    if records.is_empty() {
        bail!("no run records to report");
    }
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let verdict_names: BTreeSet<&str> = records
        .iter()
        .flat_map(|(_, r)| r.verdicts.iter().map(|v| v.name.as_str()))
        .collect();
    let fitted_names: BTreeSet<&str> = records
        .iter()
        .flat_map(|(_, r)| r.fitted.keys().map(String::as_str))
        .collect();
    let params: [(&str, &[&str]); 9] = [
        ("seed", &["seed"]),
        ("d", &["grid", "dimension"]),
        ("n", &["grid", "points"]),
        ("length", &["grid", "length"]),
        ("alpha", &["solver", "alpha"]),
        ("horizon", &["solver", "horizon"]),
        ("velocity", &["velocity", "kind"]),
        ("omega", &["atom", "omega"]),
        ("p", &["atom", "p"]),
    ];

    let csv_path = out.join("summary.csv");
    let mut w = csv::Writer::from_path(&csv_path)
        .with_context(|| format!("creating {}", csv_path.display()))?;
    let mut header: Vec<String> = vec!["run".into(), "experiment".into()];
    header.extend(params.iter().map(|(n, _)| n.to_string()));
    header.extend(["status", "passed", "failed", "skipped", "steps"].map(String::from));
    header.extend(verdict_names.iter().map(|n| format!("margin:{n}")));
    header.extend(fitted_names.iter().map(|n| format!("fit:{n}")));
    header.push("wall_clock_seconds".into());
    w.write_record(&header)?;
    for (run, rec) in records {
        let count = |s: Status| {
            rec.verdicts
                .iter()
                .filter(|v| v.status == s)
                .count()
                .to_string()
        };
        let mut row = vec![run.display().to_string(), rec.experiment().to_string()];
        row.extend(params.iter().map(|(_, path)| config_field(rec, path)));
        row.push(if rec.passed() { "pass" } else { "fail" }.into());
        row.extend([
            count(Status::Pass),
            count(Status::Fail),
            count(Status::Skipped),
        ]);
        row.push(rec.steps.to_string());
        for name in &verdict_names {
            let v = rec.verdicts.iter().find(|v| v.name == *name);
            row.push(match v {
                Some(v) if v.status == Status::Skipped => "skipped".into(),
                Some(v) => v.margin.map(fmt).unwrap_or_default(),
                None => String::new(),
            });
        }
        for name in &fitted_names {
            row.push(rec.fitted.get(*name).copied().map(fmt).unwrap_or_default());
        }
        row.push(format!("{:.3}", rec.wall_clock_seconds));
        w.write_record(&row)?;
    }
    w.flush()
        .with_context(|| format!("writing {}", csv_path.display()))?;

    let json_path = out.join("summary.json");
    let summaries: Vec<RunSummary> = records
        .iter()
        .map(|(run, rec)| RunSummary {
            run: run.display().to_string(),
            experiment: rec.experiment(),
            passed: rec.passed(),
            verdicts: &rec.verdicts,
            fitted: &rec.fitted,
            steps: rec.steps,
            wall_clock_seconds: rec.wall_clock_seconds,
        })
        .collect();
    fs::write(&json_path, serde_json::to_string_pretty(&summaries)?)
        .with_context(|| format!("writing {}", json_path.display()))?;

    let series_dir = out.join("series");
    let mut series_files = Vec::new();
    for (run, rec) in records {
        for (name, points) in &rec.series {
            fs::create_dir_all(&series_dir)
                .with_context(|| format!("creating {}", series_dir.display()))?;
            let path = series_dir.join(format!(
                "{}__{}.csv",
                safe(&run.display().to_string()),
                safe(name)
            ));
            let mut w = csv::Writer::from_path(&path)
                .with_context(|| format!("creating {}", path.display()))?;
            w.write_record(["t", "value", "log_t", "log_value"])?;
            for &(t, v) in points {
                let log = |x: f64| if x > 0.0 { fmt(x.ln()) } else { String::new() };
                w.write_record([fmt(t), fmt(v), log(t), log(v)])?;
            }
            w.flush()
                .with_context(|| format!("writing {}", path.display()))?;
            series_files.push(path);
        }
    }
    Ok(ReportFiles {
        csv: csv_path,
        json: json_path,
        series: series_files,
    })
}
