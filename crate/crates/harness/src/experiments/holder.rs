//! Propagation of Hölder regularity: the `C^beta` seminorm of the primal
//! solution stays within a fixed factor of its initial value.

use anyhow::Result;
use fracdual_core::grid::ScalarField;
use fracdual_core::regularity::holder_direct;
use fracdual_core::solver::solve_primal;
use fracdual_core::velocity::build_velocity;
use serde::{Deserialize, Serialize};

use super::{scheduled, Ctx};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub beta: f64,
    pub factor: f64,
    pub samples: usize,
    /// Data is `min(dist(x, c), cusp_radius)^beta` about the box center.
    pub cusp_radius: f64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            beta: 0.5,
            factor: 3.0,
            samples: 10,
            cusp_radius: 0.5,
        }
    }
}

pub(crate) fn run(ctx: &mut Ctx) -> Result<()> {
    let p: Params = ctx.params()?;
    let cfg = ctx.cfg;
    let grid = cfg.grid;
    let c = grid.center();
    let theta0 = ScalarField::from_fn(grid, |x| {
        grid.distance(x, c).min(p.cusp_radius).powf(p.beta)
    })?;
    let v = build_velocity(&cfg.velocity, &grid)?;
    let solver = scheduled(&cfg.solver, &grid, &v, cfg.solver.horizon, p.samples);
    let traj = solve_primal(&theta0, &v, &solver)?;
    ctx.trajectory("primal", &traj);
    let series = traj
        .snapshots
        .iter()
        .map(|(t, f)| Ok((*t, holder_direct(f, p.beta)?)))
        .collect::<Result<Vec<_>>>()?;
    let h0 = series[0].1;
    let peak = series.iter().map(|s| s.1).fold(0.0, f64::max);
    ctx.fit("holder_initial", h0);
    ctx.fit("holder_peak", peak);
    ctx.series("holder", series);
    ctx.check(
        "holder_bound",
        (p.factor * h0 - peak) / h0,
        format!("peak/initial = {:.4}", peak / h0),
    );
    Ok(())
}
