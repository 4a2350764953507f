//! Decay envelope of `|psi(s)|_p` for divergence-free drift, calibrated on
//! the drift-free run:
//! `|psi(s)|_p^p <= (|psi_0|_p^{-a} + c s)^{-(p-1)d/alpha}`,
//! `a = alpha p / ((p-1) d)`.

use anyhow::{bail, Result};
use fracdual_core::atoms::build_canonical_atom;
use fracdual_core::solver::{solve_dual, SolverConfig, Trajectory};
use fracdual_core::velocity::{build_velocity, divergence, VectorField};
use serde::{Deserialize, Serialize};

use super::{scheduled, Ctx};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub p: f64,
    pub atom_radius: f64,
    pub slack: f64,
    /// Outer steps of both runs.
    pub samples: usize,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            p: 2.0,
            atom_radius: 0.25,
            slack: 0.05,
            samples: 100,
        }
    }
}

/// `(t, |psi(t)|_p)` at every outer step.
fn norms(traj: &Trajectory) -> Vec<(f64, f64)> {
    traj.diagnostics.iter().map(|d| (d.time, d.lp)).collect()
}

pub(crate) fn run(ctx: &mut Ctx) -> Result<()> {
    let p: Params = ctx.params()?;
    let cfg = ctx.cfg;
    let (d, alpha) = (cfg.grid.dimension() as f64, cfg.solver.alpha);
    if !(p.p > 1.0 && p.p.is_finite()) {
        bail!("riccati exponent p = {} must lie in (1, inf)", p.p);
    }
    let a = alpha * p.p / ((p.p - 1.0) * d);
    let b = (p.p - 1.0) * d / alpha;
    let v = build_velocity(&cfg.velocity, &cfg.grid)?;
    let div = divergence(&v)?.sup_norm();
    ctx.fit("max_abs_divergence", div);

    let psi0 = build_canonical_atom(&cfg.grid, p.atom_radius, &cfg.atom)?.field;
    let horizon = cfg.solver.horizon;
    let base = SolverConfig {
        lp_exponent: p.p,
        ..cfg.solver.clone()
    };
    // Same outer steps with and without drift.
    let solver = scheduled(&base, &cfg.grid, &v, horizon, p.samples);
    let free = solve_dual(&psi0, &VectorField::zero(cfg.grid), horizon, &solver)?;
    let free_norms = norms(&free);
    let n0 = free_norms[0].1;
    let c = free_norms
        .iter()
        .filter(|(s, _)| *s > 0.0)
        .map(|&(s, n)| (n.powf(-a) - n0.powf(-a)) / s)
        .fold(f64::INFINITY, f64::min);
    if !(c.is_finite() && c > 0.0) {
        bail!("calibration produced c = {c}");
    }
    ctx.fit("c", c);
    let envelope = |s: f64| (n0.powf(-a) + c * s).powf(-b / p.p);
    ctx.trajectory("calibration", &free);

    let driven = solve_dual(&psi0, &v, horizon, &solver)?;
    let driven_norms = norms(&driven);
    ctx.trajectory("driven", &driven);
    let worst = driven_norms
        .iter()
        .map(|&(s, n)| ((1.0 + p.slack) * envelope(s) - n) / n0)
        .fold(f64::INFINITY, f64::min);
    ctx.series("norm_calibration", free_norms);
    ctx.series(
        "envelope",
        driven_norms
            .iter()
            .map(|&(s, _)| (s, envelope(s)))
            .collect(),
    );
    ctx.series("norm_driven", driven_norms);
    ctx.check(
        "envelope",
        worst,
        format!("c = {c:.4e}, worst margin {worst:.4e} relative to |psi_0|_p"),
    );
    Ok(())
}
