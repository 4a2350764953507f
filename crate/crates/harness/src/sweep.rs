//! One run per value of a single config field, executed concurrently.

use std::path::PathBuf;

use anyhow::{bail, Result};
use rayon::prelude::*;
use serde_json::Value;

use crate::config::ExperimentConfig;
use crate::experiments;
use crate::record::RunRecord;

/// Environment variable holding the worker count of sweeps and suites.
pub const WORKERS_ENV: &str = "FRACDUAL_WORKERS";

/// Worker count from the environment, defaulting to the available cores.
pub fn worker_count() -> Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Ok(text) => match text.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => bail!("{WORKERS_ENV}={text:?} is not a positive integer"),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Parses a comma-separated list; items that are not JSON become strings.
pub fn parse_values(csv: &str) -> Vec<Value> {
    csv.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| serde_json::from_str(s).unwrap_or_else(|_| Value::String(s.to_string())))
        .collect()
}

fn label(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Runs `base` once per value of the dotted `axis`, each in its own
/// subdirectory `<output_dir>/<axis>=<value>`. Every record is persisted as
/// soon as its run finishes; the returned list follows `values`.
pub fn sweep(
    base: &ExperimentConfig,
    axis: &str,
    values: &[Value],
    workers: usize,
) -> Result<Vec<RunRecord>> {
    if values.is_empty() {
        bail!("sweep over {axis:?} has no values");
    }
    let configs = values
        .iter()
        .map(|v| {
            let mut cfg = base.with_override(axis, v.clone())?;
            cfg.output_dir = base.output_dir.join(format!("{axis}={}", label(v)));
            Ok(cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    run_all(&configs, workers)
}

/// Runs independent configs on a pool of `workers` threads.
pub fn run_all(configs: &[ExperimentConfig], workers: usize) -> Result<Vec<RunRecord>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()?;
    pool.install(|| configs.par_iter().map(experiments::run).collect())
}

/// Output directories of a sweep, in value order.
pub fn sweep_dirs(base: &ExperimentConfig, axis: &str, values: &[Value]) -> Vec<PathBuf> {
    values
        .iter()
        .map(|v| base.output_dir.join(format!("{axis}={}", label(v))))
        .collect()
}
