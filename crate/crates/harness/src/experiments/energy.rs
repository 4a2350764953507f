//! `L^2` energy inequality of the dual flow under a compressive field, and
//! its degradation as the sink strength crosses the Sobolev constant.
//!
//! With `sigma = 2d/(d - alpha)`, the checked quantity is
//! `E(s) = |psi(s)|_2^2 + S int_0^s |psi|_sigma^2` against
//! `(1 + slack) |psi_0|_2^2`, at every outer step.

use anyhow::Result;
use fracdual_core::grid::ScalarField;
use fracdual_core::solver::{solve_dual, SolverConfig};
use fracdual_core::velocity::{
    build_velocity, neg_div_norm, sobolev_exponent, SobolevOptions, VectorField, VelocityModel,
};
use serde::{Deserialize, Serialize};

use super::{scheduled, Ctx};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    /// `|(div v)_-|_{d/alpha}` as a multiple of `S`.
    pub sink_factor: f64,
    pub slack: f64,
    /// Width of the Gaussian data centered on the sink, mean removed.
    pub bump_width: f64,
    /// Minimum number of outer steps, for the time integral.
    pub steps: usize,
    pub sobolev: SobolevOptions,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            sink_factor: 0.8,
            slack: 0.05,
            bump_width: 0.25,
            steps: 200,
            sobolev: SobolevOptions {
                starts: 8,
                max_iters: 400,
                seed: 0,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepParams {
    pub sink_factors: Vec<f64>,
    pub slack: f64,
    pub bump_width: f64,
    pub steps: usize,
    /// Allowed increase of the margin between consecutive factors.
    pub monotonicity_slack: f64,
    pub sobolev: SobolevOptions,
}

impl Default for SweepParams {
    fn default() -> Self {
        let base = Params::default();
        Self {
            sink_factors: vec![0.0, 0.4, 0.8, 1.2, 1.6, 2.0, 2.4],
            slack: base.slack,
            bump_width: base.bump_width,
            steps: base.steps,
            monotonicity_slack: 1e-12,
            sobolev: base.sobolev,
        }
    }
}

/// Builds the configured field with `|(div v)_-|_{d/alpha} = factor * S`.
fn sink_field(ctx: &mut Ctx, factor: f64, s: f64) -> Result<VectorField> {
    let (grid, alpha) = (ctx.cfg.grid, ctx.cfg.solver.alpha);
    let unit = VelocityModel {
        sink_strength: 1.0,
        ..ctx.cfg.velocity.clone()
    };
    let per_unit = neg_div_norm(&build_velocity(&unit, &grid)?, alpha)?;
    let model = VelocityModel {
        sink_strength: factor * s / per_unit,
        ..unit
    };
    let v = build_velocity(&model, &grid)?;
    ctx.fit(format!("sink_strength_f{factor}"), model.sink_strength);
    ctx.fit(format!("neg_div_norm_f{factor}"), neg_div_norm(&v, alpha)?);
    Ok(v)
}

/// Smallest `((1 + slack)|psi_0|^2 - E(s)) / |psi_0|^2` over `s > 0`; at
/// `s = 0` it equals `slack` by construction.
fn energy_margin(
    ctx: &mut Ctx,
    v: &VectorField,
    s: f64,
    (slack, width, steps): (f64, f64, usize),
    label: &str,
) -> Result<f64> {
    let cfg = ctx.cfg;
    let (d, alpha) = (cfg.grid.dimension(), cfg.solver.alpha);
    let sigma = sobolev_exponent(d, alpha);
    let c = cfg.grid.center();
    let psi0 = ScalarField::from_fn(cfg.grid, |x| {
        let z = cfg.grid.distance(x, c) / width;
        (-z * z).exp()
    })?
    .mean_free();
    let base = SolverConfig {
        lp_exponent: sigma,
        ..cfg.solver.clone()
    };
    let solver = scheduled(&base, &cfg.grid, v, cfg.solver.horizon, steps);
    let traj = solve_dual(&psi0, v, cfg.solver.horizon, &solver)?;
    let e0 = traj.diagnostics[0].l2.powi(2);
    let mut integral = 0.0;
    let mut worst = f64::INFINITY;
    let mut series = Vec::with_capacity(traj.diagnostics.len());
    for (k, dg) in traj.diagnostics.iter().enumerate() {
        if k > 0 {
            let prev = &traj.diagnostics[k - 1];
            integral += 0.5 * (dg.time - prev.time) * (dg.lp.powi(2) + prev.lp.powi(2));
        }
        let energy = dg.l2.powi(2) + s * integral;
        series.push((dg.time, energy / e0));
        if k > 0 {
            worst = worst.min(((1.0 + slack) * e0 - energy) / e0);
        }
    }
    ctx.series(format!("energy_ratio_{label}"), series);
    ctx.trajectory(label, &traj);
    Ok(worst)
}

pub(crate) fn run(ctx: &mut Ctx) -> Result<()> {
    let p: Params = ctx.params()?;
    let s = ctx.sobolev(&p.sobolev)?;
    let v = sink_field(ctx, p.sink_factor, s)?;
    let margin = energy_margin(ctx, &v, s, (p.slack, p.bump_width, p.steps), "dual")?;
    ctx.check(
        "energy_inequality",
        margin,
        format!(
            "sink at {} S, worst relative margin {margin:.4}",
            p.sink_factor
        ),
    );
    Ok(())
}

pub(crate) fn run_sweep(ctx: &mut Ctx) -> Result<()> {
    let p: SweepParams = ctx.params()?;
    let s = ctx.sobolev(&p.sobolev)?;
    let mut factors = p.sink_factors.clone();
    factors.sort_by(f64::total_cmp);
    let mut margins = Vec::with_capacity(factors.len());
    for &f in &factors {
        let v = sink_field(ctx, f, s)?;
        let m = energy_margin(
            ctx,
            &v,
            s,
            (p.slack, p.bump_width, p.steps),
            &format!("f{f}"),
        )?;
        ctx.fit(format!("margin_f{f}"), m);
        margins.push((f, m));
    }
    ctx.series("margin_vs_factor", margins.clone());
    for &(f, m) in margins.iter().filter(|(f, _)| *f <= 1.0) {
        ctx.check(
            format!("energy_inequality_f{f}"),
            m,
            format!("sink at {f} S"),
        );
    }
    let worst = margins
        .windows(2)
        .map(|w| w[0].1 - w[1].1 + p.monotonicity_slack)
        .fold(f64::INFINITY, f64::min);
    ctx.check(
        "monotone_degradation",
        worst,
        "margin non-increasing in the sink strength",
    );
    Ok(())
}
