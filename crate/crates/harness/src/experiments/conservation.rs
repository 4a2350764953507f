//! Mass conservation, positivity and `L^1` contraction of the dual flow on
//! random nonnegative data.

use anyhow::Result;
use fracdual_core::solver::solve_dual;
use fracdual_core::velocity::{SobolevOptions, VectorField};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{random_nonnegative, Ctx};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub samples: usize,
    /// Allowed mass drift relative to `|psi_0|_1`.
    pub mass_tolerance: f64,
    /// Allowed undershoot below zero.
    pub min_tolerance: f64,
    /// Allowed per-step increase of the `L^1` norm.
    pub l1_slack: f64,
    /// Target `|(div v)_-|_{d/alpha} / S` for fields with a compressive
    /// part; `null` keeps the configured field.
    pub neg_div_fraction: Option<f64>,
    pub sobolev: SobolevOptions,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            samples: 20,
            mass_tolerance: 1e-13,
            min_tolerance: 1e-12,
            l1_slack: 1e-10,
            neg_div_fraction: None,
            sobolev: SobolevOptions {
                starts: 8,
                max_iters: 400,
                seed: 0,
            },
        }
    }
}

pub(crate) fn run(ctx: &mut Ctx) -> Result<()> {
    let p: Params = ctx.params()?;
    let v = match p.neg_div_fraction {
        Some(f) => ctx.admissible_velocity(f, &p.sobolev)?,
        None => fracdual_core::velocity::build_velocity(&ctx.cfg.velocity, &ctx.cfg.grid)?,
    };
    check(ctx, &v, &p)
}

/// Runs the dual flow from `p.samples` random data and records the worst
/// mass drift, undershoot and `L^1` increase.
pub(crate) fn check(ctx: &mut Ctx, v: &VectorField, p: &Params) -> Result<()> {
    let cfg = ctx.cfg;
    let horizon = cfg.solver.horizon;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut drift, mut global_min, mut l1_rise) = (0.0f64, f64::INFINITY, f64::NEG_INFINITY);
    for k in 0..p.samples {
        let psi0 = random_nonnegative(&cfg.grid, &mut rng)?;
        let traj = solve_dual(&psi0, v, horizon, &cfg.solver)?;
        let l1 = psi0.l1_norm();
        let m0 = traj.diagnostics[0].mass;
        for w in traj.diagnostics.windows(2) {
            l1_rise = l1_rise.max(w[1].l1 - w[0].l1);
        }
        for d in &traj.diagnostics {
            drift = drift.max((d.mass - m0).abs() / l1);
            global_min = global_min.min(d.min);
        }
        ctx.trajectory(format!("sample_{k:02}"), &traj);
    }
    ctx.fit("max_mass_drift", drift);
    ctx.fit("global_min", global_min);
    ctx.fit("max_l1_increase", l1_rise);
    ctx.check(
        "mass",
        p.mass_tolerance - drift,
        format!("relative mass drift {drift:.2e}"),
    );
    ctx.check(
        "positivity",
        global_min + p.min_tolerance,
        format!("global minimum {global_min:.2e}"),
    );
    ctx.check(
        "l1_contraction",
        p.l1_slack - l1_rise,
        format!("largest per-step L1 increase {l1_rise:.2e}"),
    );
    Ok(())
}
