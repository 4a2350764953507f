//! Smoothing rate of rough `L^q` data: the `C^beta` seminorm of the primal
//! solution against `t^{-(beta + d/q)/alpha}`, first without drift (checked
//! against the Fourier semigroup), then with an admissible drift.

use anyhow::Result;
use fracdual_core::grid::ScalarField;
use fracdual_core::regularity::{fit_power_law, holder_direct};
use fracdual_core::solver::solve_primal;
use fracdual_core::spectral::diffusion_semigroup;
use fracdual_core::velocity::{SobolevOptions, VectorField};
use serde::{Deserialize, Serialize};

use super::{geometric, scheduled, Ctx};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub beta: f64,
    /// Data is `(dist(x, c)^2 + h^2)^{-d/(2q)}`, borderline in `L^q`.
    pub q: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub samples: usize,
    /// Allowed relative deviation of the drift-free exponent from the target.
    pub target_tolerance: f64,
    /// Allowed relative steepening of the exponent under drift.
    pub uniformity: f64,
    /// Allowed sup-norm gap to the Fourier semigroup, relative to the data.
    pub oracle_tolerance: f64,
    pub neg_div_fraction: f64,
    pub sobolev: SobolevOptions,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            beta: 0.4,
            q: 2.0,
            t_min: 0.01,
            t_max: 0.5,
            samples: 12,
            target_tolerance: 0.15,
            uniformity: 0.2,
            oracle_tolerance: 1e-10,
            neg_div_fraction: 0.5,
            sobolev: SobolevOptions {
                starts: 8,
                max_iters: 400,
                seed: 0,
            },
        }
    }
}

/// Solution at each of `times`, chaining solves between consecutive times.
fn evolve(
    ctx: &mut Ctx,
    theta0: &ScalarField,
    v: &VectorField,
    times: &[f64],
    label: &str,
) -> Result<Vec<ScalarField>> {
    let cfg = ctx.cfg;
    let mut out = Vec::with_capacity(times.len());
    let (mut state, mut now) = (theta0.clone(), 0.0);
    let mut steps = 0;
    for &t in times {
        let solver = scheduled(&cfg.solver, &cfg.grid, v, t - now, 1);
        let traj = solve_primal(&state, v, &solver)?;
        steps += traj.diagnostics.len() - 1;
        state = traj.last().clone();
        now = t;
        out.push(state.clone());
    }
    ctx.record.steps += steps;
    ctx.fit(format!("steps_{label}"), steps as f64);
    Ok(out)
}

pub(crate) fn run(ctx: &mut Ctx) -> Result<()> {
    let p: Params = ctx.params()?;
    let cfg = ctx.cfg;
    let grid = cfg.grid;
    let (d, alpha) = (grid.dimension() as f64, cfg.solver.alpha);
    let h = grid.spacing();
    let c = grid.center();
    let theta0 = ScalarField::from_fn(grid, |x| {
        (grid.distance(x, c).powi(2) + h * h).powf(-d / (2.0 * p.q))
    })?;
    let times = geometric(p.t_min, p.t_max, p.samples);
    let target = -(p.beta + d / p.q) / alpha;
    ctx.fit("target_exponent", target);

    let free = evolve(ctx, &theta0, &VectorField::zero(grid), &times, "v0")?;
    let mut oracle_gap = 0.0f64;
    let mut series0 = Vec::with_capacity(times.len());
    for (&t, f) in times.iter().zip(&free) {
        let exact = diffusion_semigroup(&theta0, alpha, t)?;
        oracle_gap = oracle_gap.max(f.max_abs_diff(&exact)? / theta0.sup_norm());
        series0.push((t, holder_direct(f, p.beta)?));
    }
    let fit0 = fit_power_law(&series0)?;
    ctx.fit("oracle_gap", oracle_gap);
    ctx.fit("exponent_v0", fit0.exponent);
    ctx.fit("r2_v0", fit0.r2);
    ctx.series("holder_v0", series0);
    ctx.check(
        "fourier_oracle",
        p.oracle_tolerance - oracle_gap,
        format!("sup gap {oracle_gap:.2e} relative to |theta_0|_inf"),
    );
    ctx.check(
        "exponent_v0",
        p.target_tolerance * target.abs() - (fit0.exponent - target).abs(),
        format!("fitted {:.4} against {target:.4}", fit0.exponent),
    );

    let v = ctx.admissible_velocity(p.neg_div_fraction, &p.sobolev)?;
    let driven = evolve(ctx, &theta0, &v, &times, "v")?;
    let series = times
        .iter()
        .zip(&driven)
        .map(|(&t, f)| Ok((t, holder_direct(f, p.beta)?)))
        .collect::<Result<Vec<_>>>()?;
    let fit = fit_power_law(&series)?;
    ctx.fit("exponent_v", fit.exponent);
    ctx.fit("r2_v", fit.r2);
    ctx.series("holder_v", series);
    ctx.check(
        "exponent_uniform",
        (1.0 + p.uniformity) * fit0.exponent.abs() - fit.exponent.abs(),
        format!(
            "fitted {:.4} with drift, {:.4} without",
            fit.exponent, fit0.exponent
        ),
    );
    Ok(())
}
