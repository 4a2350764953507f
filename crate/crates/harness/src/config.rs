//! Experiment configuration: one JSON document per run.
//!
//! A config file must name its `experiment`; every other key falls back to
//! that experiment's preset. Loading merges the file over the preset and
//! then parses strictly, so the echoed config carries every default.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use fracdual_core::atoms::AtomParams;
use fracdual_core::grid::GridSpec;
use fracdual_core::solver::SolverConfig;
use fracdual_core::velocity::{VelocityKind, VelocityModel};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::experiments;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentId {
    Duality,
    Conservation,
    EnergyL2,
    Cordoba,
    Riccati,
    AtomPropagation,
    RegularizationRate,
    HolderPropagation,
    Supercritical,
    ThresholdSweep,
    InterpolationBounds,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 11] = [
        ExperimentId::Duality,
        ExperimentId::Conservation,
        ExperimentId::EnergyL2,
        ExperimentId::Cordoba,
        ExperimentId::Riccati,
        ExperimentId::AtomPropagation,
        ExperimentId::RegularizationRate,
        ExperimentId::HolderPropagation,
        ExperimentId::Supercritical,
        ExperimentId::ThresholdSweep,
        ExperimentId::InterpolationBounds,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::Duality => "duality",
            ExperimentId::Conservation => "conservation",
            ExperimentId::EnergyL2 => "energy_l2",
            ExperimentId::Cordoba => "cordoba",
            ExperimentId::Riccati => "riccati",
            ExperimentId::AtomPropagation => "atom_propagation",
            ExperimentId::RegularizationRate => "regularization_rate",
            ExperimentId::HolderPropagation => "holder_propagation",
            ExperimentId::Supercritical => "supercritical",
            ExperimentId::ThresholdSweep => "threshold_sweep",
            ExperimentId::InterpolationBounds => "interpolation_bounds",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentId {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| anyhow!("unknown experiment id {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    pub grid: GridSpec,
    pub solver: SolverConfig,
    pub velocity: VelocityModel,
    pub atom: AtomParams,
    /// Seed of the initial-data generator.
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Experiment-specific settings; see each experiment's `Params`.
    pub params: Value,
}

impl ExperimentConfig {
    /// Desk-scale defaults of an experiment, as used by `check --all`.
    pub fn preset(id: ExperimentId) -> Self {
        let grid = |d, n, l| GridSpec::new(d, n, l).expect("preset grid");
        let solver = |alpha, horizon| SolverConfig {
            alpha,
            horizon,
            ..SolverConfig::default()
        };
        let out = PathBuf::from("runs").join(id.name());
        let base = |grid: GridSpec, solver: SolverConfig, velocity: VelocityModel| Self {
            experiment: id,
            grid,
            atom: AtomParams::for_alpha(grid.dimension(), solver.alpha),
            solver,
            velocity,
            seed: 0,
            output_dir: out.clone(),
            params: experiments::default_params(id),
        };
        match id {
            ExperimentId::Duality => base(
                grid(1, 1024, 1.0),
                solver(1.0, 0.25),
                VelocityModel {
                    kind: VelocityKind::Composite,
                    amplitude: 0.3,
                    sink_strength: 1.0,
                    sink_radius: 0.2,
                    sink_width: 0.05,
                    ..VelocityModel::default()
                },
            ),
            ExperimentId::Conservation => base(
                grid(1, 1024, 4.0),
                solver(0.5, 1.0),
                VelocityModel {
                    kind: VelocityKind::Composite,
                    amplitude: 0.5,
                    sink_strength: 2.0,
                    sink_radius: 0.5,
                    ..VelocityModel::default()
                },
            ),
            ExperimentId::EnergyL2 | ExperimentId::ThresholdSweep => base(
                grid(2, 256, 4.0),
                solver(1.0, 0.5),
                VelocityModel {
                    kind: VelocityKind::CompressiveSink,
                    sink_strength: 1.0,
                    sink_radius: 0.5,
                    ..VelocityModel::default()
                },
            ),
            ExperimentId::Cordoba => {
                base(grid(1, 64, 1.0), solver(1.0, 1.0), VelocityModel::default())
            }
            ExperimentId::Riccati => base(
                grid(2, 256, 4.0),
                solver(1.0, 1.0),
                VelocityModel {
                    amplitude: 0.5,
                    ..VelocityModel::default()
                },
            ),
            ExperimentId::AtomPropagation => base(
                grid(2, 256, 2.0),
                solver(1.0, 1.0),
                VelocityModel {
                    amplitude: 0.5,
                    ..VelocityModel::default()
                },
            ),
            ExperimentId::RegularizationRate => base(
                grid(1, 8192, 4.0),
                solver(0.8, 0.5),
                VelocityModel {
                    kind: VelocityKind::RoughHolder,
                    amplitude: 0.5,
                    holder_exponent: 0.6,
                    ..VelocityModel::default()
                },
            ),
            ExperimentId::HolderPropagation => base(
                grid(2, 256, 2.0),
                solver(1.0, 1.0),
                VelocityModel {
                    amplitude: 0.5,
                    ..VelocityModel::default()
                },
            ),
            ExperimentId::Supercritical => base(
                grid(1, 1024, 4.0),
                solver(0.4, 1.0),
                VelocityModel {
                    kind: VelocityKind::RoughHolder,
                    amplitude: 0.5,
                    holder_exponent: 0.6,
                    ..VelocityModel::default()
                },
            ),
            ExperimentId::InterpolationBounds => {
                let mut cfg = base(
                    grid(1, 1024, 4.0),
                    solver(1.0, 1.0),
                    VelocityModel::default(),
                );
                cfg.atom.p = f64::INFINITY;
                cfg
            }
        }
    }

    /// The full config as JSON, with experiment parameters filled in.
    pub fn to_value(&self) -> Result<Value> {
        let mut v = serde_json::to_value(self)?;
        v["params"] = experiments::complete_params(self.experiment, &self.params)?;
        Ok(v)
    }

    /// Parses a config document, filling omitted keys from the preset.
    pub fn from_value(doc: Value) -> Result<Self> {
        let id = doc
            .get("experiment")
            .and_then(Value::as_str)
            .ok_or_else(|| anyhow!("config lacks a string \"experiment\" field"))?;
        let id: ExperimentId = id.parse()?;
        let mut merged = ExperimentConfig::preset(id).to_value()?;
        merge(&mut merged, doc, "")?;
        let mut cfg: ExperimentConfig = serde_json::from_value(merged)?;
        cfg.params = experiments::complete_params(id, &cfg.params)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let doc: Value =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Self::from_value(doc).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        self.atom.validate()?;
        let d = self.grid.dimension() as f64;
        // Cordoba and the interpolation bounds do not evolve anything; the
        // duality check is posed at d = alpha = 1.
        let evolves = !matches!(
            self.experiment,
            ExperimentId::Cordoba | ExperimentId::InterpolationBounds | ExperimentId::Duality
        );
        if evolves && self.solver.alpha >= d {
            bail!(
                "alpha = {} must be below the dimension {d}",
                self.solver.alpha
            );
        }
        Ok(())
    }

    /// Copy with `value` set at a dotted `path`, such as `solver.alpha`.
    pub fn with_override(&self, path: &str, value: Value) -> Result<Self> {
        let mut doc = self.to_value()?;
        let mut slot = &mut doc;
        for key in path.split('.') {
            slot = slot
                .as_object_mut()
                .and_then(|o| o.get_mut(key))
                .ok_or_else(|| anyhow!("{path:?} does not name a config field"))?;
        }
        *slot = value;
        Self::from_value(doc)
    }
}

/// Recursive merge of JSON objects; `patch` wins on conflicts. Keys the
/// preset lacks are refused, except under `params`, which each experiment
/// parses strictly on its own.
fn merge(base: &mut Value, patch: Value, path: &str) -> Result<()> {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                let sub = if path.is_empty() {
                    k.clone()
                } else {
                    format!("{path}.{k}")
                };
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v, &sub)?,
                    None if path == "params" || path.starts_with("params.") => {
                        b.insert(k, v);
                    }
                    None => bail!("unknown config key {sub:?}"),
                }
            }
        }
        (slot, v) => *slot = v,
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn every_preset_round_trips() {
        for id in ExperimentId::ALL {
            let cfg = ExperimentConfig::preset(id);
            let back = ExperimentConfig::from_value(cfg.to_value().unwrap()).unwrap();
            assert_eq!(back.to_value().unwrap(), cfg.to_value().unwrap(), "{id}");
            assert_eq!(id.name().parse::<ExperimentId>().unwrap(), id);
        }
    }

    #[test]
    fn unknown_ids_and_keys_are_refused() {
        assert!(ExperimentConfig::from_value(json!({"experiment": "nope"})).is_err());
        assert!(
            ExperimentConfig::from_value(json!({"experiment": "duality", "bogus": 1})).is_err()
        );
        assert!(ExperimentConfig::from_value(
            json!({"experiment": "cordoba", "params": {"bogus": 1}})
        )
        .is_err());
        let err = ExperimentConfig::from_value(
            json!({"experiment": "duality", "grid": {"dimension": 1, "n": 64, "length": 1.0}}),
        )
        .unwrap_err();
        assert!(format!("{err:#}").contains("grid.n"), "{err:#}");
    }

    #[test]
    fn partial_documents_inherit_the_preset() {
        let cfg = ExperimentConfig::from_value(json!({
            "experiment": "conservation",
            "solver": {"alpha": 0.5}
        }))
        .unwrap();
        let preset = ExperimentConfig::preset(ExperimentId::Conservation);
        assert_eq!(cfg.solver.alpha, 0.5);
        assert_eq!(cfg.solver.horizon, preset.solver.horizon);
        assert_eq!(cfg.grid, preset.grid);
    }

    #[test]
    fn dotted_overrides() {
        let cfg = ExperimentConfig::preset(ExperimentId::Conservation);
        let alt = cfg.with_override("solver.alpha", json!(0.8)).unwrap();
        assert_eq!(alt.solver.alpha, 0.8);
        assert!(cfg.with_override("solver.nope", json!(1)).is_err());
        assert!(cfg.with_override("grid.points", json!(100)).is_err());
    }
}
