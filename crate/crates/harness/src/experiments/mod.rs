//! Named experiments. Each reads its typed `Params` from the config's
//! `params` object and appends diagnostics and verdicts to a [`RunRecord`].

mod conservation;
mod cordoba;
mod duality;
mod energy;
mod holder;
mod interpolation;
mod propagation;
mod regularization;
mod riccati;

use std::time::Instant;

use anyhow::{anyhow, Result};
use fracdual_core::error::Error as CoreError;
use fracdual_core::grid::{GridSpec, Point, ScalarField};
use fracdual_core::solver::{SolverConfig, Trajectory};
use fracdual_core::velocity::{
    build_velocity, neg_div_norm, sobolev_constant_with, SobolevOptions, VectorField, VelocityKind,
    VelocityModel,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::config::{ExperimentConfig, ExperimentId};
use crate::record::{RunRecord, Verdict};

/// Default `params` object of an experiment.
pub fn default_params(id: ExperimentId) -> Value {
    fn ser<P: Serialize + Default>() -> Value {
        serde_json::to_value(P::default()).expect("params serialize")
    }
    match id {
        ExperimentId::Duality => ser::<duality::Params>(),
        ExperimentId::Conservation => ser::<conservation::Params>(),
        ExperimentId::EnergyL2 => ser::<energy::Params>(),
        ExperimentId::ThresholdSweep => ser::<energy::SweepParams>(),
        ExperimentId::Cordoba => ser::<cordoba::Params>(),
        ExperimentId::Riccati => ser::<riccati::Params>(),
        ExperimentId::AtomPropagation => ser::<propagation::Params>(),
        ExperimentId::Supercritical => ser::<propagation::SupercriticalParams>(),
        ExperimentId::RegularizationRate => ser::<regularization::Params>(),
        ExperimentId::HolderPropagation => ser::<holder::Params>(),
        ExperimentId::InterpolationBounds => ser::<interpolation::Params>(),
    }
}

/// Parses `params` strictly and re-serializes it with every default filled.
pub fn complete_params(id: ExperimentId, params: &Value) -> Result<Value> {
    fn fill<P: Serialize + DeserializeOwned>(v: &Value) -> Result<Value> {
        let p: P = serde_json::from_value(v.clone()).map_err(|e| anyhow!("params: {e}"))?;
        Ok(serde_json::to_value(p)?)
    }
    match id {
        ExperimentId::Duality => fill::<duality::Params>(params),
        ExperimentId::Conservation => fill::<conservation::Params>(params),
        ExperimentId::EnergyL2 => fill::<energy::Params>(params),
        ExperimentId::ThresholdSweep => fill::<energy::SweepParams>(params),
        ExperimentId::Cordoba => fill::<cordoba::Params>(params),
        ExperimentId::Riccati => fill::<riccati::Params>(params),
        ExperimentId::AtomPropagation => fill::<propagation::Params>(params),
        ExperimentId::Supercritical => fill::<propagation::SupercriticalParams>(params),
        ExperimentId::RegularizationRate => fill::<regularization::Params>(params),
        ExperimentId::HolderPropagation => fill::<holder::Params>(params),
        ExperimentId::InterpolationBounds => fill::<interpolation::Params>(params),
    }
}

/// Runs one experiment and persists its record. Solver blow-up becomes a
/// failing verdict; any other error is returned.
pub fn run(cfg: &ExperimentConfig) -> Result<RunRecord> {
    cfg.validate()?;
    let start = Instant::now();
    let mut ctx = Ctx {
        cfg,
        record: RunRecord::new(cfg.to_value()?),
    };
    let outcome = match cfg.experiment {
        ExperimentId::Duality => duality::run(&mut ctx),
        ExperimentId::Conservation => conservation::run(&mut ctx),
        ExperimentId::EnergyL2 => energy::run(&mut ctx),
        ExperimentId::ThresholdSweep => energy::run_sweep(&mut ctx),
        ExperimentId::Cordoba => cordoba::run(&mut ctx),
        ExperimentId::Riccati => riccati::run(&mut ctx),
        ExperimentId::AtomPropagation => propagation::run(&mut ctx),
        ExperimentId::Supercritical => propagation::run_supercritical(&mut ctx),
        ExperimentId::RegularizationRate => regularization::run(&mut ctx),
        ExperimentId::HolderPropagation => holder::run(&mut ctx),
        ExperimentId::InterpolationBounds => interpolation::run(&mut ctx),
    };
    if let Err(err) = outcome {
        match err.downcast::<CoreError>() {
            Ok(CoreError::BlowUp {
                time,
                norm,
                trajectory,
            }) => {
                ctx.record.steps += trajectory.diagnostics.len().saturating_sub(1);
                ctx.record
                    .diagnostics
                    .insert("blow_up".into(), trajectory.diagnostics);
                ctx.record.verdicts.push(Verdict::failed(
                    "blow_up",
                    -norm,
                    format!("norm {norm:.3e} at t = {time}"),
                ));
            }
            Ok(other) => return Err(other.into()),
            Err(err) => return Err(err),
        }
    }
    ctx.record.wall_clock_seconds = start.elapsed().as_secs_f64();
    ctx.record.persist()?;
    Ok(ctx.record)
}

pub(crate) struct Ctx<'a> {
    pub cfg: &'a ExperimentConfig,
    pub record: RunRecord,
}

impl Ctx<'_> {
    pub fn params<P: DeserializeOwned>(&self) -> Result<P> {
        serde_json::from_value(self.cfg.params.clone()).map_err(|e| anyhow!("params: {e}"))
    }

    pub fn check(&mut self, name: impl Into<String>, margin: f64, detail: impl Into<String>) {
        self.record
            .verdicts
            .push(Verdict::from_margin(name, margin, detail));
    }

    pub fn skip(&mut self, name: impl Into<String>, detail: impl Into<String>) {
        self.record.verdicts.push(Verdict::skipped(name, detail));
    }

    pub fn fit(&mut self, name: impl Into<String>, value: f64) {
        self.record.fitted.insert(name.into(), value);
    }

    pub fn series(&mut self, name: impl Into<String>, points: Vec<(f64, f64)>) {
        self.record.series.insert(name.into(), points);
    }

    pub fn trajectory(&mut self, label: impl Into<String>, traj: &Trajectory) {
        self.record.steps += traj.diagnostics.len().saturating_sub(1);
        self.record
            .diagnostics
            .insert(label.into(), traj.diagnostics.clone());
    }

    /// Sobolev constant estimate, recorded under `S`.
    pub fn sobolev(&mut self, opts: &SobolevOptions) -> Result<f64> {
        if let Some(&s) = self.record.fitted.get("S") {
            return Ok(s);
        }
        let s = sobolev_constant_with(&self.cfg.grid, self.cfg.solver.alpha, opts)?;
        self.fit("S", s);
        Ok(s)
    }

    /// The configured field, with its compressive part rescaled so that
    /// `|(div v)_-|_{d/alpha} = fraction * S`. Fields without a compressive
    /// part are returned as built.
    pub fn admissible_velocity(
        &mut self,
        fraction: f64,
        opts: &SobolevOptions,
    ) -> Result<VectorField> {
        let grid = self.cfg.grid;
        let model = self.cfg.velocity.clone();
        let compressive = matches!(
            model.kind,
            VelocityKind::CompressiveSink | VelocityKind::Composite | VelocityKind::RoughHolder
        );
        if !compressive {
            return Ok(build_velocity(&model, &grid)?);
        }
        let alpha = self.cfg.solver.alpha;
        let s = self.sobolev(opts)?;
        let norm = neg_div_norm(&build_velocity(&model, &grid)?, alpha)?;
        if norm == 0.0 {
            self.fit("neg_div_norm", 0.0);
            return Ok(build_velocity(&model, &grid)?);
        }
        let scale = fraction * s / norm;
        let scaled = match model.kind {
            VelocityKind::RoughHolder => VelocityModel {
                amplitude: model.amplitude * scale,
                ..model
            },
            _ => VelocityModel {
                sink_strength: model.sink_strength * scale,
                ..model
            },
        };
        let v = build_velocity(&scaled, &grid)?;
        let achieved = neg_div_norm(&v, alpha)?;
        self.fit("neg_div_norm", achieved);
        self.fit("velocity_scale", scale);
        Ok(v)
    }
}

/// Solver settings for a run over `horizon` whose snapshots fall every
/// `horizon / count`, with outer steps inside the CFL limit.
pub(crate) fn scheduled(
    base: &SolverConfig,
    grid: &GridSpec,
    v: &VectorField,
    horizon: f64,
    count: usize,
) -> SolverConfig {
    let speed = v.max_speed() * grid.dimension() as f64;
    let cfl_dt = if speed > 0.0 {
        base.cfl * grid.spacing() / speed
    } else {
        f64::INFINITY
    };
    let limit = base.max_dt.unwrap_or(f64::INFINITY).min(cfl_dt);
    let interval = horizon / count.max(1) as f64;
    let per = ((interval / limit) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    SolverConfig {
        horizon,
        max_dt: Some(interval / per as f64),
        snapshot_stride: per,
        ..base.clone()
    }
}

/// Sum of one to four compactly supported nonnegative bumps.
pub(crate) fn random_nonnegative(grid: &GridSpec, rng: &mut ChaCha8Rng) -> Result<ScalarField> {
    let l = grid.length();
    let bumps: Vec<(Point, f64, f64)> = (0..rng.random_range(1..=4))
        .map(|_| {
            let c = [rng.random_range(0.0..l), rng.random_range(0.0..l)];
            (
                c,
                rng.random_range(0.02..0.25) * l,
                rng.random_range(0.1..1.0),
            )
        })
        .collect();
    Ok(ScalarField::from_fn(*grid, |x| {
        bumps
            .iter()
            .map(|&(c, w, a)| {
                let z = grid.distance(x, c) / w;
                a * (1.0 - z * z).max(0.0).powi(3)
            })
            .sum()
    })?)
}

/// Geometric grid of `n` times from `a` to `b`.
pub(crate) fn geometric(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| a * (b / a).powf(i as f64 / (n - 1).max(1) as f64))
        .collect()
}
