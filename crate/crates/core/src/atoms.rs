//! Atoms: mean-zero functions with unit mass bound, an `L^p` bound at
//! scale `r`, and concentration near a center measured by
//! `Omega(z) = min(|z|^omega, 1)`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{check_range, Error, Result};
use crate::grid::{compensated_sum, GridSpec, Point, ScalarField};
use crate::solver::Trajectory;
use crate::spectral::Fourier;
use crate::velocity::VectorField;

/// Serializes an exponent in `(1, inf]`, writing infinity as `"inf"`.
pub mod exponent_serde {
    use super::*;

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(p: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if p.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*p)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) if t == "inf" || t == "infinity" => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("bad exponent {t:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomParams {
    /// Amplitude constant `A` of the `L^p` condition.
    pub amplitude: f64,
    pub omega: f64,
    #[serde(with = "exponent_serde")]
    pub p: f64,
    /// Mollifier radius of the canonical atom, as a fraction of `r`.
    pub mollifier: f64,
    /// Fraction of the admissible level `C` used by the canonical atom.
    pub fill: f64,
}

impl Default for AtomParams {
    fn default() -> Self {
        Self {
            amplitude: 50.0,
            omega: 0.5,
            p: 2.0,
            mollifier: 0.1,
            fill: 0.9,
        }
    }
}

impl AtomParams {
    /// Defaults with `omega` at the midpoint of its admissible interval for
    /// diffusion order `alpha` in dimension `d`.
    pub fn for_alpha(d: usize, alpha: f64) -> Self {
        Self {
            omega: default_omega(d, alpha),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.amplitude;
        check_range("amplitude", a, a >= 1.0 && a.is_finite(), ">= 1")?;
        let w = self.omega;
        check_range("omega", w, w > 0.0 && w < 1.0, "(0, 1)")?;
        check_range("p", self.p, self.p > 1.0, "(1, inf]")?;
        let m = self.mollifier;
        check_range("mollifier", m, (0.0..0.5).contains(&m), "[0, 0.5)")?;
        let f = self.fill;
        check_range("fill", f, f > 0.0 && f < 1.0, "(0, 1)")
    }

    /// `1 - 1/p`, equal to 1 for `p = inf`.
    pub fn conjugate_fraction(&self) -> f64 {
        1.0 - 1.0 / self.p
    }
}

/// Midpoint of the admissible `omega` interval: `(alpha - 1, 1)` for
/// `1 <= alpha < 2`, `(1/2, 1)` for `alpha = 2`, and
/// `((alpha - d/2)_+, alpha)` for `alpha < 1`.
pub fn default_omega(d: usize, alpha: f64) -> f64 {
    if alpha >= 2.0 {
        0.75
    } else if alpha >= 1.0 {
        0.5 * alpha
    } else {
        0.5 * ((alpha - 0.5 * d as f64).max(0.0) + alpha)
    }
}

/// Volume of the Euclidean unit ball, `pi^{d/2} / Gamma(d/2 + 1)`.
pub fn unit_ball_volume(d: usize) -> f64 {
    // Gamma(d/2 + 1) by the recursion Gamma(x + 1) = x Gamma(x), from
    // Gamma(1) = 1 or Gamma(1/2) = sqrt(pi).
    let mut gamma = if d.is_multiple_of(2) { 1.0 } else { PI.sqrt() };
    let mut x = if d.is_multiple_of(2) { 1.0 } else { 0.5 };
    while x < 0.5 * d as f64 + 1.0 - 1e-9 {
        gamma *= x;
        x += 1.0;
    }
    PI.powf(0.5 * d as f64) / gamma
}

/// Strict upper bound on the canonical atom level:
/// `min(1/|B|, A |B|^{-1/p}, |B|/(d + omega))`.
pub fn canonical_level_bound(d: usize, params: &AtomParams) -> f64 {
    let b = unit_ball_volume(d);
    let second = if params.p.is_infinite() {
        params.amplitude
    } else {
        params.amplitude * b.powf(-1.0 / params.p)
    };
    (1.0 / b).min(second).min(b / (d as f64 + params.omega))
}

/// `min(|z|^omega, 1)` for a displacement `z`.
pub fn omega_weight(z: Point, omega: f64) -> f64 {
    let r = z[0].hypot(z[1]);
    if r >= 1.0 {
        1.0
    } else {
        r.powf(omega)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub field: ScalarField,
    pub r: f64,
    pub center: Point,
    pub params: AtomParams,
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Membership {
    /// Largest of the three ratios.
    pub lambda: f64,
    pub l1: f64,
    pub lp_ratio: f64,
    pub concentration_ratio: f64,
    /// Center minimizing the concentration.
    pub center: Point,
}

fn check_resolved(grid: &GridSpec, r: f64) -> Result<()> {
    check_range("r", r, r > 0.0 && r <= 1.0, "(0, 1]")?;
    let min = 8.0 * grid.spacing();
    if r < min * (1.0 - 1e-12) {
        return Err(Error::Unresolved { radius: r, min });
    }
    Ok(())
}

/// Normalized smooth bump of radius `eps` centered at the origin node.
fn mollifier_kernel(grid: &GridSpec, eps: f64) -> ScalarField {
    let origin = [0.0, 0.0];
    let raw = ScalarField::from_raw(
        *grid,
        (0..grid.len())
            .map(|i| {
                let t = grid.distance(grid.position(i), origin) / eps;
                if t < 1.0 {
                    (-1.0 / (1.0 - t * t)).exp()
                } else {
                    0.0
                }
            })
            .collect(),
    );
    let s = compensated_sum(raw.values().iter().copied());
    raw.scaled(1.0 / s)
}

/// Periodic convolution `f * g` with `g` indexed by offsets (node sum, no
/// cell volume).
pub(crate) fn convolve(fourier: &Fourier, f: &ScalarField, g: &ScalarField) -> Result<ScalarField> {
    let mut a = fourier.forward(f)?;
    let b = fourier.forward(g)?;
    for (x, y) in a.coefficients_mut().iter_mut().zip(b.coefficients()) {
        *x *= y;
    }
    fourier.inverse(&a)
}

/// Canonical atom centered in the box.
pub fn build_canonical_atom(grid: &GridSpec, r: f64, params: &AtomParams) -> Result<Atom> {
    build_canonical_atom_at(grid, r, params, grid.center())
}

/// Negative plateau inside radius `r 2^{-1/d}`, positive ring out to `r`,
/// each part carrying mass `C |B| / 2`, then mollified.
pub fn build_canonical_atom_at(
    grid: &GridSpec,
    r: f64,
    params: &AtomParams,
    center: Point,
) -> Result<Atom> {
    params.validate()?;
    check_resolved(grid, r)?;
    let d = grid.dimension();
    let level = params.fill * canonical_level_bound(d, params);
    let inner = r * 2f64.powf(-1.0 / d as f64);
    let dist: Vec<f64> = (0..grid.len())
        .map(|i| grid.distance(grid.position(i), center))
        .collect();
    let n_in = dist.iter().filter(|&&x| x <= inner).count() as f64;
    let n_out = dist.iter().filter(|&&x| x > inner && x <= r).count() as f64;
    let half_mass = 0.5 * level * unit_ball_volume(d);
    let cell = grid.cell_volume();
    let (v_in, v_out) = (-half_mass / (n_in * cell), half_mass / (n_out * cell));
    let plateau = ScalarField::from_raw(
        *grid,
        dist.iter()
            .map(|&x| {
                if x <= inner {
                    v_in
                } else if x <= r {
                    v_out
                } else {
                    0.0
                }
            })
            .collect(),
    );
    let eps = params.mollifier * r;
    let field = if eps > grid.spacing() {
        let fourier = Fourier::new(*grid);
        convolve(&fourier, &plateau, &mollifier_kernel(grid, eps))?
    } else {
        plateau
    }
    .mean_free();
    let m = atom_membership(&field, r, params)?;
    Ok(Atom {
        field,
        r,
        center: m.center,
        params: *params,
        lambda: m.lambda,
    })
}

/// Random mean-zero bump pair near a random center, rescaled to be tight
/// (`lambda = 1`).
pub fn build_random_atom(grid: &GridSpec, r: f64, params: &AtomParams, seed: u64) -> Result<Atom> {
    params.validate()?;
    check_resolved(grid, r)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = grid.dimension();
    let l = grid.length();
    let mut center = [0.0; 2];
    for c in center.iter_mut().take(d) {
        *c = rng.random_range(0.0..l);
    }
    let wmin = (2.0 * grid.spacing()).max(r / 8.0);
    let wmax = (0.5 * r).max(wmin);
    let mut bump = |sign: f64| {
        let w: f64 = rng.random_range(wmin..=wmax);
        let rho: f64 = rng.random_range(0.0..=0.5 * r);
        let th: f64 = rng.random_range(0.0..2.0 * PI);
        let c = if d == 1 {
            [center[0] + rho * th.cos().signum(), 0.0]
        } else {
            [center[0] + rho * th.cos(), center[1] + rho * th.sin()]
        };
        let b = ScalarField::from_raw(
            *grid,
            (0..grid.len())
                .map(|i| {
                    let z = grid.distance(grid.position(i), c) / w;
                    (-0.5 * z * z).exp()
                })
                .collect(),
        );
        let s = b.integral();
        b.scaled(sign / s)
    };
    let pos = bump(1.0);
    let neg = bump(-1.0);
    let raw = pos.axpy(1.0, &neg)?.mean_free();
    let m = atom_membership(&raw, r, params)?;
    let field = raw.scaled(1.0 / m.lambda);
    let m = atom_membership(&field, r, params)?;
    Ok(Atom {
        field,
        r,
        center: m.center,
        params: *params,
        lambda: m.lambda,
    })
}

/// `h^d sum |f(x)| Omega(x - center)`.
pub fn concentration(f: &ScalarField, center: Point, omega: f64) -> f64 {
    let grid = f.grid();
    compensated_sum(
        f.values().iter().enumerate().map(|(i, v)| {
            v.abs() * omega_weight(grid.displacement(center, grid.position(i)), omega)
        }),
    ) * grid.cell_volume()
}

/// Smallest `lambda` with `f / lambda` an atom of radius `r`, and the
/// center that realizes the concentration condition.
///
/// Concentration is evaluated at every node by FFT convolution, then the
/// best node is refined off-grid by a shrinking pattern search using direct
/// quadrature. Ties go to the smallest node index.
pub fn atom_membership(f: &ScalarField, r: f64, params: &AtomParams) -> Result<Membership> {
    params.validate()?;
    check_range("r", r, r > 0.0 && r.is_finite(), "positive")?;
    let grid = *f.grid();
    let d = grid.dimension();
    let l1 = f.l1_norm();
    let mean_mass = f.integral().abs();
    if mean_mass > 1e-10 * l1 {
        return Err(Error::NotMeanZero {
            mean: mean_mass,
            tolerance: 1e-10 * l1,
        });
    }
    if l1 == 0.0 {
        return Ok(Membership {
            lambda: 0.0,
            l1: 0.0,
            lp_ratio: 0.0,
            concentration_ratio: 0.0,
            center: grid.center(),
        });
    }
    let lp_scale = params.amplitude * r.powf(-(d as f64) * params.conjugate_fraction());
    let lp_ratio = f.lp_norm(params.p) / lp_scale;

    let fourier = Fourier::new(grid);
    let weight = ScalarField::from_raw(
        grid,
        (0..grid.len())
            .map(|i| {
                omega_weight(
                    grid.displacement([0.0, 0.0], grid.position(i)),
                    params.omega,
                )
            })
            .collect(),
    );
    let conv = convolve(&fourier, &f.abs(), &weight)?;
    let mut best_idx = 0;
    for (i, &c) in conv.values().iter().enumerate() {
        if c < conv.values()[best_idx] {
            best_idx = i;
        }
    }
    let mut center = grid.position(best_idx);
    let mut best = concentration(f, center, params.omega);
    let mut step = 0.5 * grid.spacing();
    let dirs: &[[f64; 2]] = if d == 1 {
        &[[1.0, 0.0], [-1.0, 0.0]]
    } else {
        &[
            [1.0, 0.0],
            [-1.0, 0.0],
            [0.0, 1.0],
            [0.0, -1.0],
            [1.0, 1.0],
            [1.0, -1.0],
            [-1.0, 1.0],
            [-1.0, -1.0],
        ]
    };
    while step > grid.spacing() / 64.0 {
        let mut improved = false;
        for dir in dirs {
            let trial = grid.wrap([center[0] + step * dir[0], center[1] + step * dir[1]]);
            let c = concentration(f, trial, params.omega);
            if c < best {
                best = c;
                center = trial;
                improved = true;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    let concentration_ratio = best / r.powf(params.omega);
    Ok(Membership {
        lambda: l1.max(lp_ratio).max(concentration_ratio),
        l1,
        lp_ratio,
        concentration_ratio,
        center,
    })
}

/// `A^{(1-1/q)/(1-1/p)} r^{-d(1-1/q)}`.
pub fn interpolation_bound(d: usize, r: f64, q: f64, params: &AtomParams) -> f64 {
    let theta = (1.0 - 1.0 / q) / params.conjugate_fraction();
    params.amplitude.powf(theta) * r.powf(-(d as f64) * (1.0 - 1.0 / q))
}

/// Exponent of `A` in the bound that ignores the unit mass condition:
/// `(omega + d(1-1/q)) / (omega + d(1-1/p))`.
pub fn mass_free_exponent(d: usize, q: f64, params: &AtomParams) -> f64 {
    let d = d as f64;
    (params.omega + d * (1.0 - 1.0 / q)) / (params.omega + d * params.conjugate_fraction())
}

/// Constant `C` with `|phi|_q <= C A^e r^{-d(1-1/q)}` for every `phi`
/// obeying only the `L^p` and concentration conditions, obtained by
/// splitting the integral at radius `u r` and minimizing over `u` in
/// `(0, 1]`.
pub fn mass_free_constant(d: usize, q: f64, params: &AtomParams) -> f64 {
    let b = unit_ball_volume(d);
    let a = params.amplitude;
    let (w, df) = (params.omega, d as f64);
    let bound = |u: f64| {
        if params.p.is_infinite() {
            a.powf(q) * b * u.powf(df) + a.powf(q - 1.0) * u.powf(-w)
        } else {
            let p = params.p;
            a.powf(q) * b.powf(1.0 - q / p) * u.powf(df * (1.0 - q / p))
                + a.powf(p * (q - 1.0) / (p - 1.0)) * u.powf(-w * (p - q) / (p - 1.0))
        }
    };
    // Unimodal in log u: golden-section search on [1e-8, 1].
    let (mut lo, mut hi) = ((1e-8f64).ln(), 0.0f64);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let x1 = hi - g * (hi - lo);
        let x2 = lo + g * (hi - lo);
        if bound(x1.exp()) < bound(x2.exp()) {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    let best = bound((0.5 * (lo + hi)).exp()).min(bound(1.0));
    best.powf(1.0 / q) / a.powf(mass_free_exponent(d, q, params))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterpolationReport {
    pub q: f64,
    pub lq: f64,
    /// Bound using the unit mass condition (constant exactly 1).
    pub mass_bound: f64,
    /// Bound using only the `L^p` and concentration conditions.
    pub mass_free_bound: f64,
    pub holds: bool,
}

/// Checks both `L^q` bounds for an atom with `lambda <= 1`.
pub fn interpolation_check(atom: &Atom, q: f64, constant: f64) -> Result<InterpolationReport> {
    let p = atom.params.p;
    check_range("q", q, (1.0..=p).contains(&q), "[1, p]")?;
    let d = atom.field.grid().dimension();
    let lq = atom.field.lp_norm(q);
    let mass_bound = interpolation_bound(d, atom.r, q, &atom.params);
    let mass_free_bound = constant
        * atom
            .params
            .amplitude
            .powf(mass_free_exponent(d, q, &atom.params))
        * atom.r.powf(-(d as f64) * (1.0 - 1.0 / q));
    let slack = 1.0 + 1e-12;
    Ok(InterpolationReport {
        q,
        lq,
        mass_bound,
        mass_free_bound,
        holds: lq <= mass_bound * slack && lq <= mass_free_bound * slack,
    })
}

/// Largest `|phi|_q / (A^e r^{-d(1-1/q)})` over canonical atoms of the
/// given radii.
pub fn canonical_family_constant(
    grid: &GridSpec,
    radii: &[f64],
    q: f64,
    params: &AtomParams,
) -> Result<f64> {
    let d = grid.dimension();
    let e = mass_free_exponent(d, q, params);
    let mut worst = 0.0f64;
    for &r in radii {
        let atom = build_canonical_atom(grid, r, params)?;
        let scale = params.amplitude.powf(e) * r.powf(-(d as f64) * (1.0 - 1.0 / q));
        worst = worst.max(atom.field.lp_norm(q) / scale);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackingMode {
    /// Average of `v` over the ball of radius `r` about the center.
    BallAverage,
    /// Value of `v` at the center.
    Pointwise,
}

/// Average of `v` over the periodic ball, with fractional coverage weights
/// `clamp((r - dist)/h + 1/2, 0, 1)` so the result is Lipschitz in `x`.
pub fn ball_average(components: &[ScalarField], x: Point, r: f64) -> Point {
    let grid = *components[0].grid();
    let (n, h) = (grid.points() as i64, grid.spacing());
    let reach = (r / h).ceil() as i64 + 2;
    let base = [(x[0] / h).floor() as i64, (x[1] / h).floor() as i64];
    let span1 = if grid.dimension() == 2 { reach } else { 0 };
    let mut acc = [0.0; 2];
    let mut total = 0.0;
    for a in -reach..=reach {
        for b in -span1..=span1 {
            let i = (base[0] + a).rem_euclid(n) as usize;
            let j = (base[1] + b).rem_euclid(n) as usize;
            let idx = grid.flatten([i, j]);
            let dist = grid.distance(x, grid.position(idx));
            let w = ((r - dist) / h + 0.5).clamp(0.0, 1.0);
            if w > 0.0 {
                total += w;
                for (axis, c) in components.iter().enumerate() {
                    acc[axis] += w * c.values()[idx];
                }
            }
        }
    }
    [acc[0] / total, acc[1] / total]
}

fn drift(v: &VectorField, x: Point, s: f64, r: f64, mode: TrackingMode) -> Result<Point> {
    let comps = v.at(s)?;
    Ok(match mode {
        TrackingMode::BallAverage => ball_average(&comps, x, r),
        TrackingMode::Pointwise => {
            let mut out = [0.0; 2];
            for (axis, c) in comps.iter().enumerate() {
                out[axis] = c.interpolate(x);
            }
            out
        }
    })
}

/// Integrates `x' = u(x, s)` with one explicit midpoint step per interval of
/// `times`, where `u` is the ball average or the point value of `v`.
pub fn track_center(
    v: &VectorField,
    x0: Point,
    r: f64,
    times: &[f64],
    mode: TrackingMode,
) -> Result<Vec<(f64, Point)>> {
    let grid = *v.grid();
    let first = *times.first().ok_or(Error::Empty("times"))?;
    let mut x = grid.wrap(x0);
    let mut path = vec![(first, x)];
    for w in times.windows(2) {
        let (s, dt) = (w[0], w[1] - w[0]);
        let k1 = drift(v, x, s, r, mode)?;
        let mid = grid.wrap([x[0] + 0.5 * dt * k1[0], x[1] + 0.5 * dt * k1[1]]);
        let k2 = drift(v, mid, s + 0.5 * dt, r, mode)?;
        x = grid.wrap([x[0] + dt * k2[0], x[1] + dt * k2[1]]);
        path.push((w[1], x));
    }
    Ok(path)
}

/// `chi(s) = h^d sum |psi(s, x)| Omega(x - x(s))` along a tracked path.
pub fn chi_series(traj: &Trajectory, path: &[(f64, Point)], omega: f64) -> Result<Vec<(f64, f64)>> {
    path.iter()
        .map(|&(s, x)| Ok((s, concentration(traj.at(s)?, x, omega))))
        .collect()
}

/// Radius `(r^alpha + K s)^{1/alpha}` reached at dual time `s` by an atom of
/// initial radius `r`.
pub fn propagated_radius(r: f64, alpha: f64, k: f64, s: f64) -> f64 {
    (r.powf(alpha) + k * s).powf(1.0 / alpha)
}
