//! Propagation of atoms by the dual flow. A canonical atom of radius `r`
//! should remain, up to the factor
//! `lambda(s) <= (r^alpha / (r^alpha + K s))^{delta/K}`, an atom of radius
//! `R(s) = (r^alpha + K s)^{1/alpha}`. The constants `(delta, K)` are
//! calibrated on one radius and reused for the others; the concentration
//! along the tracked center obeys the same envelope times `R(s)^omega`.

use anyhow::Result;
use fracdual_core::atoms::{
    atom_membership, build_canonical_atom, chi_series, propagated_radius as radius, track_center,
    TrackingMode,
};
use fracdual_core::grid::ScalarField;
use fracdual_core::solver::solve_dual;
use fracdual_core::velocity::{SobolevOptions, VectorField};
use serde::{Deserialize, Serialize};

use super::{conservation, scheduled, Ctx};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub radii: Vec<f64>,
    pub calibration_radius: f64,
    /// Horizon of each run in units of `r^alpha`.
    pub time_factor: f64,
    /// Evaluation times per run, besides `s = 0`.
    pub samples: usize,
    pub k_candidates: Vec<f64>,
    /// Multiplicative slack on the envelope.
    pub slack: f64,
    /// Allowed per-step increase of the `L^1` norm.
    pub l1_slack: f64,
    pub tracking: TrackingMode,
    /// Target `|(div v)_-|_{d/alpha} / S` for fields with a compressive part.
    pub neg_div_fraction: f64,
    pub sobolev: SobolevOptions,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            radii: vec![0.25, 0.125, 0.0625],
            calibration_radius: 0.125,
            time_factor: 2.0,
            samples: 16,
            k_candidates: vec![0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0],
            slack: 1.1,
            l1_slack: 1e-10,
            tracking: TrackingMode::BallAverage,
            neg_div_fraction: 0.5,
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
pub struct SupercriticalParams {
    pub conservation: conservation::Params,
    pub propagation: Params,
}

impl Default for SupercriticalParams {
    fn default() -> Self {
        Self {
            conservation: conservation::Params::default(),
            propagation: Params {
                tracking: TrackingMode::Pointwise,
                ..Params::default()
            },
        }
    }
}

struct RadiusRun {
    r: f64,
    times: Vec<f64>,
    fields: Vec<ScalarField>,
    chi: Vec<(f64, f64)>,
    l1: Vec<(f64, f64)>,
}

/// `(r^alpha / (r^alpha + K s))^{delta/K}`.
fn envelope(r: f64, alpha: f64, delta: f64, k: f64, s: f64) -> f64 {
    let ra = r.powf(alpha);
    (ra / (ra + k * s)).powf(delta / k)
}

fn evolve(ctx: &mut Ctx, v: &VectorField, r: f64, p: &Params) -> Result<RadiusRun> {
    let cfg = ctx.cfg;
    let (grid, alpha) = (cfg.grid, cfg.solver.alpha);
    let atom = build_canonical_atom(&grid, r, &cfg.atom)?;
    let horizon = p.time_factor * r.powf(alpha);
    let solver = scheduled(&cfg.solver, &grid, v, horizon, p.samples);
    let traj = solve_dual(&atom.field, v, horizon, &solver)?;
    let times = traj.times();
    // The dual flow samples the field at t - s.
    let drift = if v.is_steady() {
        v.clone()
    } else {
        v.time_reversed(horizon)?
    };
    let path = track_center(&drift, atom.center, r, &times, p.tracking)?;
    let chi = chi_series(&traj, &path, cfg.atom.omega)?;
    let l1 = traj.diagnostics.iter().map(|dg| (dg.time, dg.l1)).collect();
    ctx.trajectory(format!("dual_r{r}"), &traj);
    ctx.series(
        format!("center_offset_r{r}"),
        path.iter()
            .map(|&(s, x)| (s, grid.distance(x, atom.center)))
            .collect(),
    );
    let fields = traj.snapshots.into_iter().map(|(_, f)| f).collect();
    Ok(RadiusRun {
        r,
        times,
        fields,
        chi,
        l1,
    })
}

/// `lambda(s)` for the radii `R(s)` of a given `K`.
fn lambdas(ctx: &Ctx, run: &RadiusRun, k: f64) -> Result<Vec<(f64, f64)>> {
    let alpha = ctx.cfg.solver.alpha;
    run.times
        .iter()
        .zip(&run.fields)
        .map(|(&s, f)| {
            Ok((
                s,
                atom_membership(f, radius(run.r, alpha, k, s), &ctx.cfg.atom)?.lambda,
            ))
        })
        .collect()
}

/// Largest `delta` for which the envelope bounds `lambda`, or a negative
/// value when `lambda` ever exceeds 1.
fn fitted_delta(series: &[(f64, f64)], r: f64, alpha: f64, k: f64) -> f64 {
    let ra = r.powf(alpha);
    series
        .iter()
        .filter(|(s, _)| *s > 0.0)
        .map(|&(s, lam)| -k * lam.ln() / (1.0 + k * s / ra).ln())
        .fold(f64::INFINITY, f64::min)
}

pub(crate) fn run(ctx: &mut Ctx) -> Result<()> {
    let p: Params = ctx.params()?;
    let v = ctx.admissible_velocity(p.neg_div_fraction, &p.sobolev)?;
    propagate(ctx, &v, &p)
}

pub(crate) fn run_supercritical(ctx: &mut Ctx) -> Result<()> {
    let p: SupercriticalParams = ctx.params()?;
    let v = ctx.admissible_velocity(p.propagation.neg_div_fraction, &p.propagation.sobolev)?;
    let holder = fracdual_core::velocity::holder_norm(
        &v.snapshots()[0][0],
        ctx.cfg.velocity.holder_exponent,
    )?;
    ctx.fit("velocity_holder_seminorm", holder.seminorm);
    ctx.check(
        "velocity_holder_finite",
        if holder.seminorm.is_finite() {
            0.0
        } else {
            -1.0
        },
        format!("C^gamma seminorm {:.4e}", holder.seminorm),
    );
    conservation::check(ctx, &v, &p.conservation)?;
    propagate(ctx, &v, &p.propagation)
}

fn propagate(ctx: &mut Ctx, v: &VectorField, p: &Params) -> Result<()> {
    let alpha = ctx.cfg.solver.alpha;
    let omega = ctx.cfg.atom.omega;
    let cal = evolve(ctx, v, p.calibration_radius, p)?;

    // Calibration: the K with the fastest certified decay rate delta/K.
    let mut best: Option<(f64, f64)> = None;
    for &k in &p.k_candidates {
        let series = lambdas(ctx, &cal, k)?;
        let delta = fitted_delta(&series, cal.r, alpha, k);
        ctx.fit(format!("delta_for_K{k}"), delta);
        if delta > 0.0 && best.is_none_or(|(d, kk)| delta / k > d / kk) {
            best = Some((delta, k));
        }
    }
    let Some((delta, k)) = best else {
        let worst = p
            .k_candidates
            .iter()
            .map(|k| ctx.record.fitted[&format!("delta_for_K{k}")])
            .fold(f64::NEG_INFINITY, f64::max);
        ctx.check("calibration", worst, "no candidate K gives delta > 0");
        return Ok(());
    };
    ctx.fit("delta", delta);
    ctx.fit("K", k);
    ctx.fit("beta", alpha * delta / k);
    ctx.check("calibration", delta, format!("delta = {delta:.4}, K = {k}"));

    let mut runs = vec![cal];
    for &r in &p.radii {
        if (r - p.calibration_radius).abs() > 1e-15 {
            runs.push(evolve(ctx, v, r, p)?);
        }
    }
    runs.sort_by(|a, b| b.r.total_cmp(&a.r));
    for run in &runs {
        if !p.radii.iter().any(|&r| (r - run.r).abs() <= 1e-15) {
            continue;
        }
        let r = run.r;
        let series = lambdas(ctx, run, k)?;
        let lam_margin = series
            .iter()
            .map(|&(s, lam)| p.slack * envelope(r, alpha, delta, k, s) - lam)
            .fold(f64::INFINITY, f64::min);
        let chi_margin = run
            .chi
            .iter()
            .map(|&(s, chi)| {
                p.slack * envelope(r, alpha, delta, k, s) - chi / radius(r, alpha, k, s).powf(omega)
            })
            .fold(f64::INFINITY, f64::min);
        let radius_residual = run
            .times
            .iter()
            .map(|&s| {
                let target = r.powf(alpha) + k * s;
                (radius(r, alpha, k, s).powf(alpha) - target).abs() / target
            })
            .fold(0.0, f64::max);
        ctx.check(
            format!("lambda_r{r}"),
            lam_margin,
            format!(
                "worst margin {lam_margin:.4} against the envelope with slack {}",
                p.slack
            ),
        );
        ctx.check(
            format!("chi_r{r}"),
            chi_margin,
            format!("worst margin {chi_margin:.4}"),
        );
        ctx.check(
            format!("radius_r{r}"),
            1e-12 - radius_residual,
            format!("R(s)^alpha residual {radius_residual:.1e}"),
        );
        // Strict decay: the largest delta with |psi(s)|_1 <= |psi_0|_1 - delta s / r^alpha.
        let l1_0 = run.l1[0].1;
        let l1_delta = run
            .l1
            .iter()
            .filter(|(s, _)| *s > 0.0)
            .map(|&(s, m)| (l1_0 - m) * r.powf(alpha) / s)
            .fold(f64::INFINITY, f64::min);
        let l1_rise = run
            .l1
            .windows(2)
            .map(|w| w[1].1 - w[0].1)
            .fold(f64::NEG_INFINITY, f64::max);
        ctx.fit(format!("l1_delta_r{r}"), l1_delta);
        ctx.check(
            format!("l1_decay_r{r}"),
            (p.l1_slack - l1_rise).min(l1_delta),
            format!("largest per-step rise {l1_rise:.2e}, strict decay rate {l1_delta:.4}"),
        );
        ctx.series(format!("l1_r{r}"), run.l1.clone());
        ctx.series(format!("lambda_r{r}"), series);
        ctx.series(format!("chi_r{r}"), run.chi.clone());
    }
    Ok(())
}
