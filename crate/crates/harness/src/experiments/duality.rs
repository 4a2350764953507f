//! Transfer identity between the primal flow and the dual conservation law,
//! with a refinement study in `(dt, h)`.

use anyhow::Result;
use fracdual_core::grid::ScalarField;
use fracdual_core::solver::{duality_pairing, solve_dual, solve_primal, SolverConfig};
use fracdual_core::velocity::{
    build_velocity, neg_div_norm, sobolev_constant_with, SobolevOptions,
};
use serde::{Deserialize, Serialize};

use super::Ctx;

const ROUND_OFF: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    /// Centers and Gaussian widths of the data, as fractions of `L`.
    pub theta_center: f64,
    pub theta_width: f64,
    pub psi_center: f64,
    pub psi_width: f64,
    /// Outer time step in units of `h`.
    pub dt_per_h: f64,
    pub tolerance: f64,
    /// Required error ratio between the base and the refined run.
    pub min_reduction: f64,
    pub sobolev: SobolevOptions,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            theta_center: 0.4,
            theta_width: 0.08,
            psi_center: 0.6,
            psi_width: 0.1,
            dt_per_h: 1.0,
            tolerance: 1e-3,
            min_reduction: 1.5,
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
    let cfg = ctx.cfg;
    let (d, alpha, t) = (cfg.grid.dimension(), cfg.solver.alpha, cfg.solver.horizon);
    let mut errors = Vec::new();
    for level in 0..2 {
        let grid = cfg.grid.with_points(cfg.grid.points() << level)?;
        let l = grid.length();
        let gauss = |c: f64, w: f64| {
            ScalarField::from_fn(grid, |x| {
                let z = grid.distance(x, [c * l, c * l]) / (w * l);
                (-z * z).exp()
            })
        };
        let theta0 = gauss(p.theta_center, p.theta_width)?;
        let psi0 = gauss(p.psi_center, p.psi_width)?;
        let v = build_velocity(&cfg.velocity, &grid)?;
        let solver = SolverConfig {
            horizon: t,
            max_dt: Some(p.dt_per_h * grid.spacing()),
            ..cfg.solver.clone()
        };
        let primal = solve_primal(&theta0, &v, &solver)?;
        let dual = solve_dual(&psi0, &v, t, &solver)?;
        let pair = duality_pairing(&primal, &dual)?;
        ctx.trajectory(format!("primal_n{}", grid.points()), &primal);
        ctx.trajectory(format!("dual_n{}", grid.points()), &dual);
        ctx.fit(format!("lhs_n{}", grid.points()), pair.lhs);
        ctx.fit(format!("rhs_n{}", grid.points()), pair.rhs);
        ctx.fit(format!("rel_error_n{}", grid.points()), pair.rel_error);
        if level == 0 {
            if alpha < d as f64 {
                let s = sobolev_constant_with(&grid, alpha, &p.sobolev)?;
                let nd = neg_div_norm(&v, alpha)?;
                ctx.fit("S", s);
                ctx.fit("neg_div_norm", nd);
                ctx.check("smallness", 0.5 * s - nd, "|(div v)_-|_{d/alpha} < S/2");
            } else {
                ctx.skip(
                    "smallness",
                    "the critical exponent 2d/(d - alpha) is undefined at d = alpha",
                );
            }
        }
        errors.push(pair.rel_error);
    }
    let (e0, e1) = (errors[0], errors[1]);
    ctx.check(
        "rel_error",
        p.tolerance - e0,
        format!("rel_error {e0:.3e} at N = {}", cfg.grid.points()),
    );
    // Without transport both sides agree to round-off at every resolution.
    if e0 <= ROUND_OFF {
        ctx.skip("refinement", format!("rel_error {e0:.1e} is at round-off"));
        return Ok(());
    }
    let ratio = if e1 > 0.0 { e0 / e1 } else { f64::INFINITY };
    ctx.fit("refinement_ratio", ratio);
    ctx.check(
        "refinement",
        ratio - p.min_reduction,
        format!("error ratio {ratio:.3} under halving (dt, h)"),
    );
    Ok(())
}
