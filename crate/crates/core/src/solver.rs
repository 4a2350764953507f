//! Split-step integration of the primal transport-diffusion equation and
//! the dual conservation law.
//!
//! Each step composes an advection substep with the exact fractional heat
//! flow. Advection is sub-cycled so every substep respects the CFL number.
//! The default advection is first-order upwind: conservative flux form for
//! the dual equation (exact mass, positivity) and convective form for the
//! primal one (discrete max principle).

use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::grid::{GridSpec, ScalarField};
use crate::spectral::{dealias_in_place, heat_table, Fourier};
use crate::velocity::VectorField;

/// Any norm beyond this aborts the run.
pub const BLOW_UP_THRESHOLD: f64 = 1e12;

pub const DEFAULT_CFL: f64 = 0.45;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Splitting {
    /// advect(dt/2), diffuse(dt), advect(dt/2)
    Strang,
    /// advect(dt), diffuse(dt)
    Lie,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Advection {
    UpwindFv,
    /// Pseudo-spectral right-hand side with SSP-RK3 substeps.
    Spectral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub alpha: f64,
    pub horizon: f64,
    pub cfl: f64,
    pub splitting: Splitting,
    pub advection: Advection,
    pub dealias: bool,
    /// Keep every `snapshot_stride`-th step (the final state is always kept).
    pub snapshot_stride: usize,
    /// Outer step (rounded down to divide the horizon); `None` lets the CFL
    /// condition decide.
    pub max_dt: Option<f64>,
    /// Exponent of the extra Lebesgue norm tracked in the diagnostics.
    pub lp_exponent: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            horizon: 1.0,
            cfl: DEFAULT_CFL,
            splitting: Splitting::Strang,
            advection: Advection::UpwindFv,
            dealias: true,
            snapshot_stride: 1,
            max_dt: None,
            lp_exponent: 4.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let a = self.alpha;
        check_range("alpha", a, a > 0.0 && a <= 2.0, "(0, 2]")?;
        let t = self.horizon;
        check_range("horizon", t, t > 0.0 && t.is_finite(), "positive")?;
        let c = self.cfl;
        check_range("cfl", c, c > 0.0 && c <= 1.0, "(0, 1]")?;
        if self.snapshot_stride == 0 {
            return Err(Error::OutOfRange {
                name: "snapshot_stride",
                value: 0.0,
                expected: ">= 1",
            });
        }
        if let Some(m) = self.max_dt {
            check_range("max_dt", m, m > 0.0 && m.is_finite(), "positive")?;
        }
        let p = self.lp_exponent;
        check_range("lp_exponent", p, p >= 1.0, ">= 1")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub time: f64,
    pub mass: f64,
    pub l1: f64,
    pub l2: f64,
    pub lp: f64,
    pub min: f64,
    pub max: f64,
}

impl Diagnostics {
    pub fn of(time: f64, f: &ScalarField, p: f64) -> Self {
        Self {
            time,
            mass: f.integral(),
            l1: f.l1_norm(),
            l2: f.l2_norm(),
            lp: f.lp_norm(p),
            min: f.min(),
            max: f.max(),
        }
    }

    fn largest(&self) -> f64 {
        self.l1
            .max(self.l2)
            .max(self.lp)
            .max(self.min.abs())
            .max(self.max.abs())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<(f64, ScalarField)>,
    pub config: SolverConfig,
    /// One entry for the initial state and one per outer step.
    pub diagnostics: Vec<Diagnostics>,
    pub dt: f64,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|(t, _)| *t).collect()
    }

    pub fn initial(&self) -> &ScalarField {
        &self.snapshots[0].1
    }

    pub fn last(&self) -> &ScalarField {
        &self.snapshots[self.snapshots.len() - 1].1
    }

    pub fn final_time(&self) -> f64 {
        self.snapshots[self.snapshots.len() - 1].0
    }

    /// Snapshot whose time matches `t` to a relative 1e-9.
    pub fn at(&self, t: f64) -> Result<&ScalarField> {
        let tol = 1e-9 * t.abs().max(self.dt).max(1e-300);
        self.snapshots
            .iter()
            .find(|(s, _)| (s - t).abs() <= tol)
            .map(|(_, f)| f)
            .ok_or(Error::TimeMismatch(t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Form {
    Conservative,
    Convective,
}

/// Time parametrization of the sampled velocity.
#[derive(Debug, Clone, Copy)]
enum Clock {
    Forward,
    /// `s -> v(t - s)`
    Reversed(f64),
}

impl Clock {
    fn map(self, s: f64) -> f64 {
        match self {
            Clock::Forward => s,
            Clock::Reversed(t) => t - s,
        }
    }
}

fn sample<'a>(v: &'a VectorField, clock: Clock, s: f64) -> Result<Cow<'a, [ScalarField]>> {
    if v.is_steady() {
        Ok(Cow::Borrowed(&v.snapshots()[0]))
    } else {
        Ok(Cow::Owned(v.at(clock.map(s))?))
    }
}

fn check_velocity(v: &VectorField) -> Result<()> {
    for (k, snap) in v.snapshots().iter().enumerate() {
        for c in snap {
            if let Some(i) = c.values().iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite {
                    index: k * c.len() + i,
                });
            }
        }
    }
    Ok(())
}

/// Average of neighbouring nodes along `axis`: face `i + 1/2` is stored at `i`.
fn face_velocity(grid: &GridSpec, c: &ScalarField, axis: usize) -> Vec<f64> {
    let n = grid.points();
    let vals = c.values();
    (0..grid.len())
        .map(|idx| {
            let mut ij = grid.unflatten(idx);
            ij[axis] = (ij[axis] + 1) % n;
            0.5 * (vals[idx] + vals[grid.flatten(ij)])
        })
        .collect()
}

fn neighbour(grid: &GridSpec, idx: usize, axis: usize, forward: bool) -> usize {
    let n = grid.points();
    let mut ij = grid.unflatten(idx);
    ij[axis] = if forward {
        (ij[axis] + 1) % n
    } else {
        (ij[axis] + n - 1) % n
    };
    grid.flatten(ij)
}

/// Largest stable rate `dt_sub * rate <= h` for one snapshot.
fn advective_rate(grid: &GridSpec, comps: &[ScalarField], form: Form) -> f64 {
    match form {
        Form::Conservative => {
            let faces: Vec<Vec<f64>> = (0..grid.dimension())
                .map(|a| face_velocity(grid, &comps[a], a))
                .collect();
            (0..grid.len())
                .map(|idx| {
                    (0..grid.dimension())
                        .map(|a| {
                            let out_right = faces[a][idx].max(0.0);
                            let out_left = (-faces[a][neighbour(grid, idx, a, false)]).max(0.0);
                            out_right + out_left
                        })
                        .sum::<f64>()
                })
                .fold(0.0, f64::max)
        }
        Form::Convective => (0..grid.len())
            .map(|idx| comps.iter().map(|c| c.values()[idx].abs()).sum::<f64>())
            .fold(0.0, f64::max),
    }
}

fn upwind_conservative(psi: &[f64], grid: &GridSpec, faces: &[Vec<f64>], lambda: f64) -> Vec<f64> {
    let mut out = psi.to_vec();
    for (axis, w) in faces.iter().enumerate() {
        let flux: Vec<f64> = (0..grid.len())
            .map(|idx| {
                let right = neighbour(grid, idx, axis, true);
                w[idx].max(0.0) * psi[idx] - (-w[idx]).max(0.0) * psi[right]
            })
            .collect();
        for idx in 0..grid.len() {
            let left = neighbour(grid, idx, axis, false);
            out[idx] -= lambda * (flux[idx] - flux[left]);
        }
    }
    out
}

fn upwind_convective(
    theta: &[f64],
    grid: &GridSpec,
    comps: &[ScalarField],
    lambda: f64,
) -> Vec<f64> {
    let mut out = theta.to_vec();
    for (axis, c) in comps.iter().enumerate() {
        let v = c.values();
        for idx in 0..grid.len() {
            let vi = v[idx];
            if vi > 0.0 {
                let right = neighbour(grid, idx, axis, true);
                out[idx] += lambda * vi * (theta[right] - theta[idx]);
            } else if vi < 0.0 {
                let left = neighbour(grid, idx, axis, false);
                out[idx] += lambda * vi * (theta[idx] - theta[left]);
            }
        }
    }
    out
}

/// Pseudo-spectral advective right-hand side.
fn spectral_rhs(
    fourier: &Fourier,
    f: &ScalarField,
    comps: &[ScalarField],
    form: Form,
) -> Result<ScalarField> {
    let grid = *f.grid();
    let mut acc = ScalarField::zeros(grid);
    for (axis, c) in comps.iter().enumerate() {
        let term = match form {
            Form::Conservative => {
                let flux = ScalarField::from_raw(
                    grid,
                    f.values()
                        .iter()
                        .zip(c.values())
                        .map(|(a, b)| a * b)
                        .collect(),
                );
                fourier.derivative(&flux, axis)?.scaled(-1.0)
            }
            Form::Convective => {
                let d = fourier.derivative(f, axis)?;
                ScalarField::from_raw(
                    grid,
                    d.values()
                        .iter()
                        .zip(c.values())
                        .map(|(a, b)| a * b)
                        .collect(),
                )
            }
        };
        acc = acc.axpy(1.0, &term)?;
    }
    Ok(acc)
}

fn truncate(fourier: &Fourier, f: &ScalarField) -> Result<ScalarField> {
    let mut s = fourier.forward(f)?;
    dealias_in_place(&mut s);
    fourier.inverse(&s)
}

struct Advector<'a> {
    fourier: &'a Fourier,
    v: &'a VectorField,
    clock: Clock,
    form: Form,
    cfl: f64,
    scheme: Advection,
    dealias: bool,
    steady_faces: Option<Vec<Vec<f64>>>,
    steady_rate: Option<f64>,
}

impl<'a> Advector<'a> {
    fn new(
        fourier: &'a Fourier,
        v: &'a VectorField,
        clock: Clock,
        form: Form,
        cfg: &SolverConfig,
    ) -> Self {
        let grid = fourier.grid();
        let (steady_faces, steady_rate) = if v.is_steady() {
            let comps = &v.snapshots()[0];
            let faces = (form == Form::Conservative).then(|| {
                (0..grid.dimension())
                    .map(|a| face_velocity(grid, &comps[a], a))
                    .collect()
            });
            (faces, Some(advective_rate(grid, comps, form)))
        } else {
            (None, None)
        };
        Self {
            fourier,
            v,
            clock,
            form,
            cfl: cfg.cfl,
            scheme: cfg.advection,
            dealias: cfg.dealias,
            steady_faces,
            steady_rate,
        }
    }

    fn rate_at(&self, s: f64) -> Result<f64> {
        match self.steady_rate {
            Some(r) => Ok(r),
            None => Ok(advective_rate(
                self.fourier.grid(),
                &sample(self.v, self.clock, s)?,
                self.form,
            )),
        }
    }

    /// Advances `f` from time `s0` over `dt` with sub-cycling.
    fn advance(&self, f: &ScalarField, s0: f64, dt: f64) -> Result<ScalarField> {
        let grid = *self.fourier.grid();
        let h = grid.spacing();
        let rate = self.rate_at(s0)?.max(self.rate_at(s0 + dt)?);
        if rate == 0.0 {
            return Ok(f.clone());
        }
        let subs = ((dt * rate / (self.cfl * h)).ceil() as usize).max(1);
        let sub = dt / subs as f64;
        let mut cur = f.clone();
        for k in 0..subs {
            let mid = s0 + (k as f64 + 0.5) * sub;
            let comps = sample(self.v, self.clock, mid)?;
            cur = match self.scheme {
                Advection::UpwindFv => {
                    let lambda = sub / h;
                    let values = match self.form {
                        Form::Conservative => {
                            let owned;
                            let faces = match &self.steady_faces {
                                Some(fc) => fc,
                                None => {
                                    owned = (0..grid.dimension())
                                        .map(|a| face_velocity(&grid, &comps[a], a))
                                        .collect::<Vec<_>>();
                                    &owned
                                }
                            };
                            upwind_conservative(cur.values(), &grid, faces, lambda)
                        }
                        Form::Convective => upwind_convective(cur.values(), &grid, &comps, lambda),
                    };
                    ScalarField::from_raw(grid, values)
                }
                Advection::Spectral => {
                    let next = self.ssp_rk3(&cur, s0 + k as f64 * sub, sub)?;
                    if self.dealias {
                        truncate(self.fourier, &next)?
                    } else {
                        next
                    }
                }
            };
        }
        Ok(cur)
    }

    fn ssp_rk3(&self, f: &ScalarField, s: f64, dt: f64) -> Result<ScalarField> {
        let l = |g: &ScalarField, t: f64| -> Result<ScalarField> {
            let comps = sample(self.v, self.clock, t)?;
            spectral_rhs(self.fourier, g, &comps, self.form)
        };
        let u1 = f.axpy(dt, &l(f, s)?)?;
        let u2 = f.scaled(0.75).axpy(0.25, &u1.axpy(dt, &l(&u1, s + dt)?)?)?;
        f.scaled(1.0 / 3.0)
            .axpy(2.0 / 3.0, &u2.axpy(dt, &l(&u2, s + 0.5 * dt)?)?)
    }
}

fn validate_step(v: &VectorField, f: &ScalarField, dt: f64) -> Result<()> {
    check_range("dt", dt, dt > 0.0 && dt.is_finite(), "positive")?;
    check_velocity(v)?;
    if v.grid() != f.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

/// Flux-form upwind transport `d/ds psi = -div(v psi)` over `dt`, with `v`
/// sampled from time 0 and sub-cycled at the default CFL number.
pub fn step_advect_conservative(
    psi: &ScalarField,
    v: &VectorField,
    dt: f64,
) -> Result<ScalarField> {
    validate_step(v, psi, dt)?;
    let fourier = Fourier::new(*psi.grid());
    let cfg = SolverConfig::default();
    Advector::new(&fourier, v, Clock::Forward, Form::Conservative, &cfg).advance(psi, 0.0, dt)
}

/// Convective upwind transport `d/dt theta = v . grad theta` over `dt`.
pub fn step_advect_primal(theta: &ScalarField, v: &VectorField, dt: f64) -> Result<ScalarField> {
    validate_step(v, theta, dt)?;
    let fourier = Fourier::new(*theta.grid());
    let cfg = SolverConfig::default();
    Advector::new(&fourier, v, Clock::Forward, Form::Convective, &cfg).advance(theta, 0.0, dt)
}

/// Outer step: `max_dt` if given, else the CFL step (or the whole horizon
/// when `v = 0`), then shrunk so that it divides the horizon. Advection
/// sub-cycles inside each outer step as needed.
fn outer_step(cfg: &SolverConfig, grid: &GridSpec, v: &VectorField, horizon: f64) -> (f64, usize) {
    let speed = v.max_speed() * grid.dimension() as f64;
    let dt = match cfg.max_dt {
        Some(dt) => dt,
        None if speed > 0.0 => cfg.cfl * grid.spacing() / speed,
        None => horizon,
    };
    let steps = ((horizon / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    (horizon / steps as f64, steps)
}

fn integrate(
    f0: &ScalarField,
    v: &VectorField,
    horizon: f64,
    clock: Clock,
    form: Form,
    cfg: &SolverConfig,
) -> Result<Trajectory> {
    let grid = *f0.grid();
    if v.grid() != &grid {
        return Err(Error::GridMismatch);
    }
    check_velocity(v)?;
    let fourier = Fourier::new(grid);
    let advector = Advector::new(&fourier, v, clock, form, cfg);
    let mut traj = Trajectory {
        snapshots: vec![(0.0, f0.clone())],
        config: cfg.clone(),
        diagnostics: vec![Diagnostics::of(0.0, f0, cfg.lp_exponent)],
        dt: 0.0,
    };
    if horizon == 0.0 {
        return Ok(traj);
    }
    let (dt, steps) = outer_step(cfg, &grid, v, horizon);
    traj.dt = dt;
    let heat = heat_table(&grid, cfg.alpha, dt);
    let mut cur = f0.clone();
    for step in 1..=steps {
        let s0 = (step - 1) as f64 * dt;
        cur = match cfg.splitting {
            Splitting::Strang => {
                let a = advector.advance(&cur, s0, 0.5 * dt)?;
                let b = fourier.filter(&a, &heat)?;
                advector.advance(&b, s0 + 0.5 * dt, 0.5 * dt)?
            }
            Splitting::Lie => {
                let a = advector.advance(&cur, s0, dt)?;
                fourier.filter(&a, &heat)?
            }
        };
        let time = if step == steps {
            horizon
        } else {
            step as f64 * dt
        };
        let diag = Diagnostics::of(time, &cur, cfg.lp_exponent);
        traj.diagnostics.push(diag);
        let big = diag.largest();
        if !big.is_finite() || big > BLOW_UP_THRESHOLD {
            traj.snapshots.push((time, cur.clone()));
            return Err(Error::BlowUp {
                time,
                norm: big,
                trajectory: Box::new(traj),
            });
        }
        if step % cfg.snapshot_stride == 0 || step == steps {
            traj.snapshots.push((time, cur.clone()));
        }
    }
    Ok(traj)
}

/// Solves the primal equation on `[0, cfg.horizon]`.
pub fn solve_primal(
    theta0: &ScalarField,
    v: &VectorField,
    cfg: &SolverConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    if cfg.horizon > v.span() * (1.0 + 1e-12) {
        return Err(Error::OutsideSpan {
            time: cfg.horizon,
            span: v.span(),
        });
    }
    integrate(
        theta0,
        v,
        cfg.horizon,
        Clock::Forward,
        Form::Convective,
        cfg,
    )
}

/// Solves the dual conservation law on `[0, t]` with velocity `v(t - s)`.
/// `cfg.horizon` is ignored in favour of `t`.
pub fn solve_dual(
    psi0: &ScalarField,
    v: &VectorField,
    t: f64,
    cfg: &SolverConfig,
) -> Result<Trajectory> {
    let mut cfg = cfg.clone();
    if t > 0.0 {
        cfg.horizon = t;
    }
    cfg.validate()?;
    check_range("t", t, t >= 0.0 && t.is_finite(), "non-negative")?;
    if t > v.span() * (1.0 + 1e-12) {
        return Err(Error::OutsideSpan {
            time: t,
            span: v.span(),
        });
    }
    integrate(psi0, v, t, Clock::Reversed(t), Form::Conservative, &cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pairing {
    /// Quadrature of `theta(t) psi_0`.
    pub lhs: f64,
    /// Quadrature of `theta_0 psi(t)`.
    pub rhs: f64,
    pub rel_error: f64,
}

/// Compares the two sides of the transfer identity between a primal run
/// and a dual run over the same horizon.
pub fn duality_pairing(theta: &Trajectory, psi: &Trajectory) -> Result<Pairing> {
    let (a, b) = (theta.final_time(), psi.final_time());
    if (a - b).abs() > 1e-12 * a.abs().max(b.abs()) {
        return Err(Error::HorizonMismatch(a, b));
    }
    let lhs = theta.last().inner(psi.initial())?;
    let rhs = theta.initial().inner(psi.last())?;
    let scale = lhs.abs().max(rhs.abs());
    let rel_error = if scale == 0.0 {
        0.0
    } else {
        (lhs - rhs).abs() / scale
    };
    Ok(Pairing {
        lhs,
        rhs,
        rel_error,
    })
}
