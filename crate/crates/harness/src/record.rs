//! Run records: config echo, diagnostics, fitted constants and verdicts.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use fracdual_core::solver::Diagnostics;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const RECORD_FILE: &str = "record.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

/// Outcome of one check. `margin` is the signed distance to the bound in
/// the check's own units; negative exactly when the check fails.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub status: Status,
    pub margin: Option<f64>,
    pub detail: String,
}

impl Verdict {
    pub fn from_margin(name: impl Into<String>, margin: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            status: if margin >= 0.0 {
                Status::Pass
            } else {
                Status::Fail
            },
            // NaN is not representable in JSON.
            margin: Some(if margin.is_nan() {
                f64::NEG_INFINITY
            } else {
                margin
            }),
            detail: detail.into(),
        }
        .sanitized()
    }

    pub fn skipped(name: impl Into<String>, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            status: Status::Skipped,
            margin: None,
            detail: detail.into(),
        }
    }

    pub fn failed(name: impl Into<String>, margin: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            status: Status::Fail,
            margin: Some(margin.min(-0.0)),
            detail: detail.into(),
        }
        .sanitized()
    }

    fn sanitized(mut self) -> Self {
        if let Some(m) = self.margin {
            if m.is_nan() {
                self.status = Status::Fail;
                self.margin = Some(-f64::MAX);
            } else if m.is_infinite() {
                self.margin = Some(m.signum() * f64::MAX);
            }
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: Value,
    /// Per-step solver diagnostics, keyed by solve label.
    pub diagnostics: BTreeMap<String, Vec<Diagnostics>>,
    /// Derived time series such as `lambda(s)` or the Hölder norm in time.
    pub series: BTreeMap<String, Vec<(f64, f64)>>,
    pub fitted: BTreeMap<String, f64>,
    pub verdicts: Vec<Verdict>,
    pub steps: usize,
    pub wall_clock_seconds: f64,
}

impl RunRecord {
    pub fn new(config: Value) -> Self {
        Self {
            config,
            diagnostics: BTreeMap::new(),
            series: BTreeMap::new(),
            fitted: BTreeMap::new(),
            verdicts: Vec::new(),
            steps: 0,
            wall_clock_seconds: 0.0,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.status != Status::Fail)
    }

    pub fn experiment(&self) -> &str {
        self.config["experiment"].as_str().unwrap_or("")
    }

    pub fn output_dir(&self) -> PathBuf {
        PathBuf::from(self.config["output_dir"].as_str().unwrap_or("."))
    }

    /// Writes `record.json` into the run's output directory.
    pub fn persist(&self) -> Result<PathBuf> {
        let dir = self.output_dir();
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(RECORD_FILE);
        let text = serde_json::to_string_pretty(self)?;
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}
