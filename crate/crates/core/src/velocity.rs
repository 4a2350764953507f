//! Advection fields and the norms that gate the regularity hypotheses.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::grid::{compensated_sum, GridSpec, ScalarField};
use crate::spectral::{mode_vector, power_table, wavevector, Fourier, SpectralField};

/// A possibly time-dependent vector field, stored as snapshots on a uniform
/// time lattice `0, dt, 2 dt, ...` and interpolated linearly in between.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: GridSpec,
    snapshots: Vec<Vec<ScalarField>>,
    snapshot_spacing: f64,
}

impl VectorField {
    /// A field that does not depend on time.
    pub fn steady(components: Vec<ScalarField>) -> Result<Self> {
        let grid = *components.first().ok_or(Error::Empty("components"))?.grid();
        Self::check_components(&grid, &components)?;
        Ok(Self {
            grid,
            snapshots: vec![components],
            snapshot_spacing: 0.0,
        })
    }

    /// Snapshots at times `0, spacing, 2 spacing, ...`.
    pub fn unsteady(snapshots: Vec<Vec<ScalarField>>, spacing: f64) -> Result<Self> {
        let first = snapshots.first().ok_or(Error::Empty("snapshots"))?;
        let grid = *first.first().ok_or(Error::Empty("components"))?.grid();
        for s in &snapshots {
            Self::check_components(&grid, s)?;
        }
        if snapshots.len() > 1 {
            check_range(
                "spacing",
                spacing,
                spacing > 0.0 && spacing.is_finite(),
                "positive",
            )?;
        }
        Ok(Self {
            grid,
            snapshots,
            snapshot_spacing: spacing,
        })
    }

    pub fn zero(grid: GridSpec) -> Self {
        Self {
            grid,
            snapshots: vec![vec![ScalarField::zeros(grid); grid.dimension()]],
            snapshot_spacing: 0.0,
        }
    }

    fn check_components(grid: &GridSpec, c: &[ScalarField]) -> Result<()> {
        if c.len() != grid.dimension() {
            return Err(Error::SizeMismatch {
                expected: grid.dimension(),
                actual: c.len(),
            });
        }
        if c.iter().any(|f| f.grid() != grid) {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn is_steady(&self) -> bool {
        self.snapshots.len() == 1
    }

    pub fn snapshots(&self) -> &[Vec<ScalarField>] {
        &self.snapshots
    }

    /// Time span covered by the snapshots; infinite for a steady field.
    pub fn span(&self) -> f64 {
        if self.is_steady() {
            f64::INFINITY
        } else {
            self.snapshot_spacing * (self.snapshots.len() - 1) as f64
        }
    }

    /// Components at time `t`, linearly interpolated between snapshots.
    pub fn at(&self, t: f64) -> Result<Vec<ScalarField>> {
        if self.is_steady() {
            return Ok(self.snapshots[0].clone());
        }
        let span = self.span();
        let tol = 1e-12 * span.max(1.0);
        if !(t >= -tol && t <= span + tol) {
            return Err(Error::OutsideSpan { time: t, span });
        }
        let s = (t / self.snapshot_spacing).clamp(0.0, (self.snapshots.len() - 1) as f64);
        let i0 = (s.floor() as usize).min(self.snapshots.len() - 2);
        let w = s - i0 as f64;
        let (a, b) = (&self.snapshots[i0], &self.snapshots[i0 + 1]);
        a.iter()
            .zip(b)
            .map(|(fa, fb)| fa.scaled(1.0 - w).axpy(w, fb))
            .collect()
    }

    /// The field `s -> v(t - s)` on `[0, t]`.
    pub fn time_reversed(&self, t: f64) -> Result<VectorField> {
        if self.is_steady() {
            return Ok(self.clone());
        }
        if t > self.span() * (1.0 + 1e-12) || t < 0.0 {
            return Err(Error::OutsideSpan {
                time: t,
                span: self.span(),
            });
        }
        let count = ((t / self.snapshot_spacing).round() as usize).max(1);
        let spacing = t / count as f64;
        let snaps = (0..=count)
            .map(|i| self.at(t - i as f64 * spacing))
            .collect::<Result<Vec<_>>>()?;
        VectorField::unsteady(snaps, spacing)
    }

    pub fn scaled(&self, c: f64) -> VectorField {
        VectorField {
            grid: self.grid,
            snapshots: self
                .snapshots
                .iter()
                .map(|s| s.iter().map(|f| f.scaled(c)).collect())
                .collect(),
            snapshot_spacing: self.snapshot_spacing,
        }
    }

    /// Pointwise sum; both fields must be steady or share the time lattice.
    pub fn add(&self, other: &VectorField) -> Result<VectorField> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let snapshots = match (self.is_steady(), other.is_steady()) {
            (true, true) => vec![add_components(&self.snapshots[0], &other.snapshots[0])?],
            _ if self.snapshots.len() == other.snapshots.len()
                && self.snapshot_spacing == other.snapshot_spacing =>
            {
                self.snapshots
                    .iter()
                    .zip(&other.snapshots)
                    .map(|(a, b)| add_components(a, b))
                    .collect::<Result<_>>()?
            }
            (true, false) => other
                .snapshots
                .iter()
                .map(|b| add_components(&self.snapshots[0], b))
                .collect::<Result<_>>()?,
            (false, true) => self
                .snapshots
                .iter()
                .map(|a| add_components(a, &other.snapshots[0]))
                .collect::<Result<_>>()?,
            _ => return Err(Error::Malformed("incompatible time lattices".into())),
        };
        let spacing = self.snapshot_spacing.max(other.snapshot_spacing);
        Ok(VectorField {
            grid: self.grid,
            snapshots,
            snapshot_spacing: spacing,
        })
    }

    /// Largest Euclidean speed over all nodes and snapshots.
    pub fn max_speed(&self) -> f64 {
        self.snapshots
            .iter()
            .map(|s| speed_max(s))
            .fold(0.0, f64::max)
    }

    pub fn has_non_finite(&self) -> bool {
        self.snapshots
            .iter()
            .flatten()
            .any(|f| f.values().iter().any(|v| !v.is_finite()))
    }
}

fn add_components(a: &[ScalarField], b: &[ScalarField]) -> Result<Vec<ScalarField>> {
    a.iter().zip(b).map(|(x, y)| x.axpy(1.0, y)).collect()
}

pub(crate) fn speed_max(components: &[ScalarField]) -> f64 {
    let n = components[0].len();
    (0..n)
        .map(|i| {
            components
                .iter()
                .map(|c| c.values()[i].powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VelocityKind {
    DivergenceFree,
    CompressiveSink,
    Shear,
    RoughHolder,
    Composite,
}

impl VelocityKind {
    pub fn name(self) -> &'static str {
        match self {
            VelocityKind::DivergenceFree => "divergence_free",
            VelocityKind::CompressiveSink => "compressive_sink",
            VelocityKind::Shear => "shear",
            VelocityKind::RoughHolder => "rough_holder",
            VelocityKind::Composite => "composite",
        }
    }
}

/// Recipe for a steady test field.
///
/// * `amplitude`: peak speed of the divergence-free, shear and rough parts.
/// * `modes`: largest integer wavenumber in the random streamfunction.
/// * `sink_strength`: depth `s` of the sink; the divergence equals
///   `-s (b - mean b)` for a mollified ball indicator `b`.
/// * `sink_radius`: radius of that ball, in physical units.
/// * `sink_width`: width of the ball's smoothed edge, in physical units;
///   0 selects two grid spacings.
/// * `holder_exponent`: target exponent of the rough field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VelocityModel {
    pub kind: VelocityKind,
    pub amplitude: f64,
    pub modes: usize,
    pub sink_strength: f64,
    pub sink_radius: f64,
    pub sink_width: f64,
    pub holder_exponent: f64,
    pub seed: u64,
}

impl Default for VelocityModel {
    fn default() -> Self {
        Self {
            kind: VelocityKind::DivergenceFree,
            amplitude: 1.0,
            modes: 3,
            sink_strength: 0.0,
            sink_radius: 0.5,
            sink_width: 0.0,
            holder_exponent: 0.5,
            seed: 0,
        }
    }
}

pub fn build_velocity(model: &VelocityModel, grid: &GridSpec) -> Result<VectorField> {
    check_range(
        "amplitude",
        model.amplitude,
        model.amplitude.is_finite(),
        "finite",
    )?;
    let fourier = Fourier::new(*grid);
    match model.kind {
        VelocityKind::DivergenceFree => divergence_free(model, &fourier),
        VelocityKind::Shear => {
            if grid.dimension() != 2 {
                return Err(Error::KindDimension {
                    kind: "shear",
                    dimension: grid.dimension(),
                });
            }
            let k = 2.0 * PI / grid.length();
            let a = model.amplitude;
            VectorField::steady(vec![
                ScalarField::from_fn(*grid, |x| a * (k * x[1]).sin())?,
                ScalarField::zeros(*grid),
            ])
        }
        VelocityKind::CompressiveSink => compressive_sink(model, &fourier),
        VelocityKind::RoughHolder => rough_holder(model, &fourier),
        VelocityKind::Composite => {
            divergence_free(model, &fourier)?.add(&compressive_sink(model, &fourier)?)
        }
    }
}

fn divergence_free(model: &VelocityModel, fourier: &Fourier) -> Result<VectorField> {
    let grid = *fourier.grid();
    if grid.dimension() == 1 {
        return VectorField::steady(vec![ScalarField::constant(grid, model.amplitude)]);
    }
    if model.amplitude == 0.0 {
        return Ok(VectorField::zero(grid));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    let m = model.modes.max(1) as i64;
    let mut coeffs = vec![Complex64::new(0.0, 0.0); grid.len()];
    let n = grid.points() as i64;
    let slot = |mi: i64| mi.rem_euclid(n) as usize;
    for m0 in -m..=m {
        for m1 in 0..=m {
            if m1 == 0 && m0 <= 0 {
                continue;
            }
            let amp = rng.random_range(0.0..1.0) / ((m0 * m0 + m1 * m1) as f64);
            let phase = rng.random_range(0.0..2.0 * PI);
            let c = Complex64::from_polar(amp, phase);
            coeffs[grid.flatten([slot(m0), slot(m1)])] += c;
            coeffs[grid.flatten([slot(-m0), slot(-m1)])] += c.conj();
        }
    }
    let stream = SpectralField::new(grid, coeffs)?;
    let mut vx = stream.clone();
    let mut vy = stream;
    // v = (d/dy psi, -d/dx psi)
    vx.apply(|k, nyq| {
        if nyq {
            0.0.into()
        } else {
            Complex64::new(0.0, k[1])
        }
    });
    vy.apply(|k, nyq| {
        if nyq {
            0.0.into()
        } else {
            Complex64::new(0.0, -k[0])
        }
    });
    let comps = vec![fourier.inverse(&vx)?, fourier.inverse(&vy)?];
    let speed = speed_max(&comps);
    let scale = if speed > 0.0 {
        model.amplitude / speed
    } else {
        0.0
    };
    Ok(VectorField::steady(comps)?.scaled(scale))
}

/// Mollified indicator of the ball of radius `radius` about the box center,
/// with a `tanh` edge of width `width` (two grid spacings when 0).
pub fn sink_profile(grid: &GridSpec, radius: f64, width: f64) -> Result<ScalarField> {
    let c = grid.center();
    let w = if width > 0.0 {
        width
    } else {
        2.0 * grid.spacing()
    };
    ScalarField::from_fn(*grid, |x| {
        0.5 * (1.0 - ((grid.distance(x, c) - radius) / w).tanh())
    })
}

/// Gradient of the potential solving `Laplacian phi = target`, where
/// `target` is replaced by its mean-free, Nyquist-free part.
pub fn gradient_of_potential(fourier: &Fourier, target: &ScalarField) -> Result<VectorField> {
    let grid = *fourier.grid();
    let spec = fourier.forward(target)?;
    let mut comps = Vec::with_capacity(grid.dimension());
    for axis in 0..grid.dimension() {
        let mut s = spec.clone();
        s.apply(|k, nyq| {
            let k2 = k[0] * k[0] + k[1] * k[1];
            if nyq || k2 == 0.0 {
                0.0.into()
            } else {
                // i k_axis / (-|k|^2)
                Complex64::new(0.0, -k[axis] / k2)
            }
        });
        comps.push(fourier.inverse(&s)?);
    }
    VectorField::steady(comps)
}

fn compressive_sink(model: &VelocityModel, fourier: &Fourier) -> Result<VectorField> {
    let grid = *fourier.grid();
    check_range(
        "sink_strength",
        model.sink_strength,
        model.sink_strength >= 0.0 && model.sink_strength.is_finite(),
        "non-negative",
    )?;
    check_range(
        "sink_radius",
        model.sink_radius,
        model.sink_radius > 0.0 && model.sink_radius < 0.5 * grid.length(),
        "(0, L/2)",
    )?;
    check_range(
        "sink_width",
        model.sink_width,
        model.sink_width >= 0.0,
        ">= 0",
    )?;
    let b = sink_profile(&grid, model.sink_radius, model.sink_width)?;
    gradient_of_potential(fourier, &b.scaled(-model.sink_strength))
}

fn rough_holder(model: &VelocityModel, fourier: &Fourier) -> Result<VectorField> {
    let grid = *fourier.grid();
    let gamma = model.holder_exponent;
    check_range(
        "holder_exponent",
        gamma,
        gamma > 0.0 && gamma < 1.0,
        "(0, 1)",
    )?;
    if model.amplitude == 0.0 {
        return Ok(VectorField::zero(grid));
    }
    let d = grid.dimension() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    let mut comps = Vec::new();
    for _ in 0..grid.dimension() {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); grid.len()];
        let mut done = vec![false; grid.len()];
        let n = grid.points() as i64;
        for idx in 0..grid.len() {
            let (k, nyq) = wavevector(&grid, idx);
            let mag = k[0].hypot(k[1]);
            if nyq || mag == 0.0 || done[idx] {
                continue;
            }
            let m = mode_vector(&grid, idx);
            let mirror = grid.flatten([
                (-m[0]).rem_euclid(n) as usize,
                (-m[1]).rem_euclid(n) as usize,
            ]);
            let c = Complex64::from_polar(
                mag.powf(-(0.5 * d + gamma)),
                rng.random_range(0.0..2.0 * PI),
            );
            coeffs[idx] = c;
            coeffs[mirror] = c.conj();
            done[idx] = true;
            done[mirror] = true;
        }
        comps.push(fourier.inverse(&SpectralField::new(grid, coeffs)?)?);
    }
    let speed = speed_max(&comps);
    Ok(VectorField::steady(comps)?.scaled(model.amplitude / speed))
}

/// Spectral divergence of one snapshot.
pub fn divergence_of(fourier: &Fourier, components: &[ScalarField]) -> Result<ScalarField> {
    let grid = *fourier.grid();
    let mut acc = ScalarField::zeros(grid);
    for (axis, c) in components.iter().enumerate() {
        acc = acc.axpy(1.0, &fourier.derivative(c, axis)?)?;
    }
    Ok(acc)
}

/// Spectral divergence of the first snapshot.
pub fn divergence(v: &VectorField) -> Result<ScalarField> {
    divergence_of(&Fourier::new(v.grid), &v.snapshots[0])
}

/// `|| (f)_- ||_{L^p}` with `x_- = max(-x, 0)`.
pub fn neg_part_norm(f: &ScalarField, p: f64) -> f64 {
    f.negative_part().lp_norm(p)
}

/// Divergence values above `-NEG_DIV_FLOOR` count as non-negative.
pub const NEG_DIV_FLOOR: f64 = 1e-10;

/// `|| (div v)_- ||_{L^{d/alpha}}`, maximized over snapshots.
pub fn neg_div_norm(v: &VectorField, alpha: f64) -> Result<f64> {
    let d = v.grid.dimension() as f64;
    check_range("alpha", alpha, alpha > 0.0 && alpha < d, "(0, d)")?;
    let fourier = Fourier::new(v.grid);
    let mut worst = 0.0f64;
    for snap in &v.snapshots {
        let div = divergence_of(&fourier, snap)?;
        // Round-off in the spectral divergence is not compression.
        let div = div.map(|x| if x >= -NEG_DIV_FLOOR { x.max(0.0) } else { x });
        worst = worst.max(neg_part_norm(&div, d / alpha));
    }
    Ok(worst)
}

/// Mean `L^1` oscillation over dyadic cubes of side `N, N/2, ..., 2` cells
/// at every cyclic position, maximized over components and snapshots.
///
/// The exhaustive set of positions makes the estimate invariant under
/// whole-cell cyclic shifts. Cost is about `N^{2d}` operations.
pub fn bmo_norm(v: &VectorField) -> f64 {
    v.snapshots
        .iter()
        .flatten()
        .map(bmo_scalar)
        .fold(0.0, f64::max)
}

pub fn bmo_scalar(f: &ScalarField) -> f64 {
    let grid = *f.grid();
    let n = grid.points();
    let d = grid.dimension();
    let vals = f.values();
    let mut side = n;
    let mut best = 0.0f64;
    while side >= 2 {
        let cells = side.pow(d as u32);
        let osc = (0..grid.len())
            .into_par_iter()
            .map(|origin| {
                let [o0, o1] = grid.unflatten(origin);
                let at = |a: usize, b: usize| {
                    if d == 1 {
                        vals[(o0 + a) % n]
                    } else {
                        vals[((o0 + a) % n) * n + (o1 + b) % n]
                    }
                };
                let span1 = if d == 1 { 1 } else { side };
                let mut mean = 0.0;
                for a in 0..side {
                    for b in 0..span1 {
                        mean += at(a, b);
                    }
                }
                mean /= cells as f64;
                let mut dev = 0.0;
                for a in 0..side {
                    for b in 0..span1 {
                        dev += (at(a, b) - mean).abs();
                    }
                }
                dev / cells as f64
            })
            .reduce(|| 0.0, f64::max);
        best = best.max(osc);
        side /= 2;
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderNorm {
    pub seminorm: f64,
    pub sup: f64,
}

/// Difference-quotient estimate of the `C^gamma` seminorm over offsets of
/// `1..=N/4` cells along the axes and (in d=2) both diagonals.
pub fn holder_norm(f: &ScalarField, gamma: f64) -> Result<HolderNorm> {
    check_range("gamma", gamma, gamma > 0.0 && gamma < 1.0, "(0, 1)")?;
    let grid = *f.grid();
    let n = grid.points();
    let h = grid.spacing();
    let vals = f.values();
    let mut offsets: Vec<[usize; 2]> = Vec::new();
    for k in 1..=n / 4 {
        offsets.push([k, 0]);
        if grid.dimension() == 2 {
            offsets.push([0, k]);
            offsets.push([k, k]);
            offsets.push([k, n - k]);
        }
    }
    let seminorm = offsets
        .par_iter()
        .map(|&[a, b]| {
            let sa = a.min(n - a) as f64;
            let sb = b.min(n - b) as f64;
            let dist = h * sa.hypot(sb);
            let denom = dist.powf(gamma);
            let mut worst = 0.0f64;
            for idx in 0..vals.len() {
                let [i, j] = grid.unflatten(idx);
                let other = grid.flatten([(i + a) % n, (j + b) % n]);
                worst = worst.max((vals[other] - vals[idx]).abs());
            }
            worst / denom
        })
        .reduce(|| 0.0, f64::max);
    Ok(HolderNorm {
        seminorm,
        sup: f.sup_norm(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SobolevOptions {
    pub starts: usize,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for SobolevOptions {
    fn default() -> Self {
        Self {
            starts: 8,
            max_iters: 1500,
            seed: 0,
        }
    }
}

/// Critical Lebesgue exponent `2d/(d - alpha)`.
pub fn sobolev_exponent(d: usize, alpha: f64) -> f64 {
    2.0 * d as f64 / (d as f64 - alpha)
}

/// Rayleigh-type quotient `|f|^2_{H^{alpha/2}} / |f|^2_{L^sigma}`.
pub fn sobolev_quotient(f: &ScalarField, alpha: f64) -> Result<f64> {
    let d = f.grid().dimension();
    check_range("alpha", alpha, alpha > 0.0 && alpha < d as f64, "(0, d)")?;
    let sigma = sobolev_exponent(d, alpha);
    let num = crate::spectral::sobolev_seminorm(f, 0.5 * alpha)?;
    let den = f.lp_norm(sigma).powi(2);
    Ok(num / den)
}

/// Smallest quotient over mean-zero fields found by preconditioned descent
/// from several random smooth starts.
pub fn sobolev_constant(grid: &GridSpec, alpha: f64) -> Result<f64> {
    sobolev_constant_with(grid, alpha, &SobolevOptions::default())
}

pub fn sobolev_constant_with(grid: &GridSpec, alpha: f64, opts: &SobolevOptions) -> Result<f64> {
    let d = grid.dimension();
    check_range("alpha", alpha, alpha > 0.0 && alpha < d as f64, "(0, d)")?;
    if opts.starts == 0 {
        return Err(Error::Empty("starts"));
    }
    let fourier = Fourier::new(*grid);
    let sigma = sobolev_exponent(d, alpha);
    let mult = power_table(grid, alpha);
    let precond: Vec<f64> = mult
        .iter()
        .map(|&m| if m > 0.0 { 1.0 / m } else { 0.0 })
        .collect();
    let cell = grid.cell_volume();
    let quotient = |spec: &SpectralField, f: &ScalarField| {
        let num = crate::spectral::seminorm_from_spectrum(spec, 0.5 * alpha);
        let integral = compensated_sum(f.values().iter().map(|v| v.abs().powf(sigma))) * cell;
        (num, integral, num / integral.powf(2.0 / sigma))
    };
    let mut best = f64::INFINITY;
    for start in 0..opts.starts {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(start as u64));
        let noise: Vec<f64> = (0..grid.len())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let width = 0.3 * rng.random_range(0.1..3.0);
        let mut f = fourier
            .filter(
                &ScalarField::new(*grid, noise)?,
                &crate::spectral::heat_table(grid, 1.0, width),
            )?
            .mean_free();
        let (mut num, mut integral, mut q) = quotient(&fourier.forward(&f)?, &f);
        let mut step = 1.0f64;
        for _ in 0..opts.max_iters {
            let den = integral.powf(2.0 / sigma);
            let gnum = fourier.filter(&f, &mult)?.scaled(2.0 * cell);
            let gden = f
                .map(|v| v.abs().powf(sigma - 2.0) * v)
                .scaled(2.0 * integral.powf(2.0 / sigma - 1.0) * cell);
            let grad = gnum.axpy(-num / den, &gden)?.scaled(1.0 / den).mean_free();
            let dir = fourier.filter(&grad, &precond)?.scaled(-1.0);
            let dn = dir.l2_norm();
            if dn == 0.0 {
                break;
            }
            let rel = f.l2_norm() / dn;
            let mut accepted = false;
            while step >= 1e-12 {
                let trial = f.axpy(step * rel, &dir)?.mean_free();
                let tspec = fourier.forward(&trial)?;
                let (tn, ti, tq) = quotient(&tspec, &trial);
                if tq < q {
                    f = trial;
                    num = tn;
                    integral = ti;
                    q = tq;
                    step *= 1.5;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        best = best.min(q);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g2(n: usize) -> GridSpec {
        GridSpec::new(2, n, 4.0).unwrap()
    }

    #[test]
    fn shear_is_divergence_free_and_needs_two_dimensions() {
        let m = VelocityModel {
            kind: VelocityKind::Shear,
            ..Default::default()
        };
        let v = build_velocity(&m, &g2(32)).unwrap();
        assert!(divergence(&v).unwrap().sup_norm() < 1e-12);
        let g1 = GridSpec::new(1, 32, 4.0).unwrap();
        assert!(matches!(
            build_velocity(&m, &g1),
            Err(Error::KindDimension { .. })
        ));
    }

    #[test]
    fn streamfunction_field_is_solenoidal_and_seeded() {
        let m = VelocityModel {
            seed: 17,
            amplitude: 2.0,
            ..Default::default()
        };
        let v = build_velocity(&m, &g2(64)).unwrap();
        assert!(divergence(&v).unwrap().sup_norm() < 1e-10);
        assert!((v.max_speed() - 2.0).abs() < 1e-12);
        assert_eq!(v, build_velocity(&m, &g2(64)).unwrap());
        assert_eq!(neg_div_norm(&v, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn sink_divergence_matches_target() {
        let grid = g2(64);
        let m = VelocityModel {
            kind: VelocityKind::CompressiveSink,
            sink_strength: 1.7,
            sink_radius: 0.6,
            ..Default::default()
        };
        let v = build_velocity(&m, &grid).unwrap();
        let div = divergence(&v).unwrap();
        // Oracle: the Nyquist-free, mean-free part of -s b.
        let b = sink_profile(&grid, 0.6, 0.0).unwrap();
        let f = Fourier::new(grid);
        let table: Vec<f64> = (0..grid.len())
            .map(|i| {
                let (k, nyq) = wavevector(&grid, i);
                if nyq || (k[0] == 0.0 && k[1] == 0.0) {
                    0.0
                } else {
                    1.0
                }
            })
            .collect();
        let target = f.filter(&b.scaled(-1.7), &table).unwrap();
        assert!(div.max_abs_diff(&target).unwrap() < 1e-10);
        assert!(div.mean().abs() < 1e-12);
    }

    #[test]
    fn gradient_divergence_is_laplacian() {
        let grid = g2(32);
        let k = 2.0 * PI / 4.0;
        let phi =
            ScalarField::from_fn(grid, |x| (k * x[0]).sin() * (2.0 * k * x[1]).cos()).unwrap();
        let f = Fourier::new(grid);
        let grad = VectorField::steady(vec![
            f.derivative(&phi, 0).unwrap(),
            f.derivative(&phi, 1).unwrap(),
        ])
        .unwrap();
        let expect = phi.scaled(-5.0 * k * k);
        assert!(divergence(&grad).unwrap().max_abs_diff(&expect).unwrap() < 1e-11);
    }

    #[test]
    fn neg_div_norm_of_piecewise_sink() {
        // div v = -c on a set of measure mu, +c mu / (1 - mu) elsewhere.
        let grid = GridSpec::new(1, 256, 4.0).unwrap();
        let c = 0.8;
        let div = ScalarField::from_fn(grid, |x| if x[0] < 1.0 { -c } else { c / 3.0 }).unwrap();
        let alpha = 0.5;
        let got = neg_part_norm(&div, 1.0 / alpha);
        assert!((got - c * 1.0f64.powf(alpha)).abs() < 1e-12);
        let grid = GridSpec::new(2, 32, 4.0).unwrap();
        let div = ScalarField::from_fn(grid, |x| if x[0] < 1.0 && x[1] < 2.0 { -c } else { 0.1 })
            .unwrap();
        let got = neg_part_norm(&div, 2.0 / 1.5);
        assert!((got - c * 2.0f64.powf(1.5 / 2.0)).abs() < 1e-12);
    }

    #[test]
    fn expanding_field_has_zero_negative_part() {
        let grid = GridSpec::new(1, 64, 4.0).unwrap();
        let div = ScalarField::from_fn(grid, |x| (x[0] - 2.0).powi(2)).unwrap();
        assert_eq!(neg_part_norm(&div, 2.0), 0.0);
    }

    #[test]
    fn bmo_basics() {
        let grid = GridSpec::new(1, 64, 1.0).unwrap();
        let c = ScalarField::constant(grid, 3.0);
        assert_eq!(bmo_scalar(&c), 0.0);
        let s = ScalarField::from_fn(grid, |x| (2.0 * PI * x[0]).sin()).unwrap();
        let b = bmo_scalar(&s);
        assert!(b > 0.0 && b <= 1.0);
        assert!((bmo_scalar(&s.scaled(2.5)) - 2.5 * b).abs() < 1e-12);
    }

    #[test]
    fn bmo_is_shift_invariant() {
        let grid = GridSpec::new(2, 16, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let vals = (0..grid.len())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let f = ScalarField::new(grid, vals).unwrap();
        assert_eq!(bmo_scalar(&f), bmo_scalar(&f.rolled([3, -5])));
    }

    #[test]
    fn log_profile_bmo_stays_bounded_while_sup_grows() {
        let grid = GridSpec::new(1, 1024, 4.0).unwrap();
        let profile = |w: f64| {
            ScalarField::from_fn(grid, |x| {
                let r = grid.distance(x, [2.0, 0.0]);
                -0.5 * (r * r + w * w).ln()
            })
            .unwrap()
        };
        let (a, b) = (profile(0.05), profile(0.0125));
        let sup_ratio = b.sup_norm() / a.sup_norm();
        let bmo_ratio = bmo_scalar(&b) / bmo_scalar(&a);
        assert!(sup_ratio > bmo_ratio, "{sup_ratio} vs {bmo_ratio}");
    }

    #[test]
    fn holder_of_power_profile() {
        let grid = GridSpec::new(1, 1024, 4.0).unwrap();
        let gamma = 0.6;
        let f = ScalarField::from_fn(grid, |x| grid.distance(x, [0.0, 0.0]).powf(gamma)).unwrap();
        let hn = holder_norm(&f, gamma).unwrap();
        assert!((hn.seminorm - 1.0).abs() < 0.05, "{}", hn.seminorm);
        let c = holder_norm(&ScalarField::constant(grid, 2.0), gamma).unwrap();
        assert_eq!(c.seminorm, 0.0);
        let scaled = holder_norm(&f.scaled(3.0), gamma).unwrap();
        assert!((scaled.seminorm - 3.0 * hn.seminorm).abs() < 1e-12);
        assert!(holder_norm(&f, 1.0).is_err());
    }

    #[test]
    fn time_interpolation_and_reversal() {
        let grid = GridSpec::new(1, 16, 1.0).unwrap();
        let snaps = (0..3)
            .map(|i| vec![ScalarField::constant(grid, i as f64)])
            .collect();
        let v = VectorField::unsteady(snaps, 0.5).unwrap();
        assert_eq!(v.span(), 1.0);
        assert!((v.at(0.75).unwrap()[0].values()[0] - 1.5).abs() < 1e-15);
        assert!(v.at(1.5).is_err());
        let r = v.time_reversed(1.0).unwrap();
        assert!((r.at(0.25).unwrap()[0].values()[0] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn sobolev_quotient_is_scale_invariant() {
        let grid = GridSpec::new(1, 128, 4.0).unwrap();
        let f = ScalarField::from_fn(grid, |x| (PI * x[0] / 2.0).sin() + 0.2 * (PI * x[0]).cos())
            .unwrap();
        let q = sobolev_quotient(&f, 0.5).unwrap();
        let q2 = sobolev_quotient(&f.scaled(-7.0), 0.5).unwrap();
        assert!((q - q2).abs() < 1e-12 * q);
    }

    #[test]
    fn sobolev_constant_is_below_every_probe() {
        let grid = GridSpec::new(1, 128, 4.0).unwrap();
        let opts = SobolevOptions {
            starts: 8,
            max_iters: 300,
            seed: 1,
        };
        let s = sobolev_constant_with(&grid, 0.5, &opts).unwrap();
        for w in [0.1, 0.3, 1.0] {
            let probe = ScalarField::from_fn(grid, |x| {
                (-(grid.distance(x, [2.0, 0.0]) / w).powi(2)).exp()
            })
            .unwrap()
            .mean_free();
            assert!(s <= sobolev_quotient(&probe, 0.5).unwrap());
        }
        assert!(sobolev_constant(&grid, 1.0).is_err());
    }
}
