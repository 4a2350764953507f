//! Discrete Fourier machinery on the periodic grid.
//!
//! Convention: the forward transform is unnormalized,
//! `F[m] = sum_j f[j] exp(-2 pi i m j / N)`, and the inverse carries the
//! `1/N^d` factor, so `inverse(forward(f)) = f`. Coefficients are stored in
//! FFT order: slot `j` holds integer wavenumber `m = j` for `j < N/2` and
//! `m = j - N` otherwise, so `m` ranges over `[-N/2, N/2)`. The physical
//! frequency is `k = 2 pi m / L`.
//!
//! The Nyquist slot `m = -N/2` has no symmetric partner. Derivative and
//! power multipliers (`|k|^s`, `i k`) zero it. The heat semigroup damps it
//! by its own factor so that `t = 0` is the identity.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{check_range, Error, Result};
use crate::grid::{GridSpec, ScalarField};

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: GridSpec,
    coefficients: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(grid: GridSpec, coefficients: Vec<Complex64>) -> Result<Self> {
        if coefficients.len() != grid.len() {
            return Err(Error::SizeMismatch {
                expected: grid.len(),
                actual: coefficients.len(),
            });
        }
        Ok(Self { grid, coefficients })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn coefficients_mut(&mut self) -> &mut [Complex64] {
        &mut self.coefficients
    }

    /// Coefficient at integer wavevector `m` (each component in `[-N/2, N/2)`).
    pub fn at(&self, m: [i64; 2]) -> Complex64 {
        let n = self.grid.points() as i64;
        let slot = |mi: i64| mi.rem_euclid(n) as usize;
        self.coefficients[self.grid.flatten([slot(m[0]), slot(m[1])])]
    }

    /// Multiplies each coefficient by `f(k, nyquist)`.
    pub fn apply(&mut self, f: impl Fn([f64; 2], bool) -> Complex64) {
        let grid = self.grid;
        for (idx, c) in self.coefficients.iter_mut().enumerate() {
            let (k, nyq) = wavevector(&grid, idx);
            *c *= f(k, nyq);
        }
    }

    /// Multiplies by a precomputed real table of the same length.
    pub fn apply_table(&mut self, table: &[f64]) {
        debug_assert_eq!(table.len(), self.coefficients.len());
        for (c, &t) in self.coefficients.iter_mut().zip(table) {
            *c *= t;
        }
    }
}

/// Signed integer wavenumber of FFT slot `j`.
pub fn mode_index(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Integer wavevector of a flat index; the unused second entry is 0 in d=1.
pub fn mode_vector(grid: &GridSpec, index: usize) -> [i64; 2] {
    let n = grid.points();
    let [i, j] = grid.unflatten(index);
    match grid.dimension() {
        1 => [mode_index(i, n), 0],
        _ => [mode_index(i, n), mode_index(j, n)],
    }
}

/// Physical wavevector of a flat index and whether it touches a Nyquist row.
pub fn wavevector(grid: &GridSpec, index: usize) -> ([f64; 2], bool) {
    let n = grid.points() as i64;
    let m = mode_vector(grid, index);
    let scale = 2.0 * PI / grid.length();
    let nyq = m[0] == -n / 2 || (grid.dimension() == 2 && m[1] == -n / 2);
    ([scale * m[0] as f64, scale * m[1] as f64], nyq)
}

/// Table of `|k|^s` with the Nyquist rows zeroed.
pub fn power_table(grid: &GridSpec, s: f64) -> Vec<f64> {
    (0..grid.len())
        .map(|idx| {
            let (k, nyq) = wavevector(grid, idx);
            let mag = k[0].hypot(k[1]);
            if nyq || mag == 0.0 {
                0.0
            } else {
                mag.powf(s)
            }
        })
        .collect()
}

/// Table of `exp(-t |k|^alpha)`, Nyquist included.
pub fn heat_table(grid: &GridSpec, alpha: f64, t: f64) -> Vec<f64> {
    (0..grid.len())
        .map(|idx| {
            let (k, _) = wavevector(grid, idx);
            let mag = k[0].hypot(k[1]);
            if mag == 0.0 {
                1.0
            } else {
                (-t * mag.powf(alpha)).exp()
            }
        })
        .collect()
}

/// A reusable transform plan for one grid.
#[derive(Clone)]
pub struct Fourier {
    grid: GridSpec,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fourier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fourier").field("grid", &self.grid).finish()
    }
}

impl Fourier {
    pub fn new(grid: GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        let n = grid.points();
        Self {
            grid,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn check(&self, grid: &GridSpec) -> Result<()> {
        if *grid == self.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.grid.points();
        // Rows are contiguous: this covers the single axis in d=1 and the
        // second axis in d=2.
        plan.process(data);
        if self.grid.dimension() == 2 {
            transpose(data, n);
            plan.process(data);
            transpose(data, n);
        }
    }

    pub fn forward(&self, field: &ScalarField) -> Result<SpectralField> {
        self.check(field.grid())?;
        let mut data: Vec<Complex64> = field
            .values()
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        self.transform(&mut data, &self.forward);
        Ok(SpectralField {
            grid: self.grid,
            coefficients: data,
        })
    }

    /// Inverse transform; the imaginary round-off is discarded.
    pub fn inverse(&self, spec: &SpectralField) -> Result<ScalarField> {
        self.check(&spec.grid)?;
        let mut data = spec.coefficients.clone();
        self.transform(&mut data, &self.inverse);
        let scale = 1.0 / self.grid.len() as f64;
        let values = data.iter().map(|c| c.re * scale).collect();
        ScalarField::new(self.grid, values)
    }

    /// `inverse(table * forward(field))`.
    pub fn filter(&self, field: &ScalarField, table: &[f64]) -> Result<ScalarField> {
        let mut spec = self.forward(field)?;
        spec.apply_table(table);
        self.inverse(&spec)
    }

    /// Spectral partial derivative along `axis`.
    pub fn derivative(&self, field: &ScalarField, axis: usize) -> Result<ScalarField> {
        let mut spec = self.forward(field)?;
        spec.apply(|k, nyq| {
            if nyq {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, k[axis])
            }
        });
        self.inverse(&spec)
    }
}

fn transpose(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

pub fn forward(field: &ScalarField) -> Result<SpectralField> {
    Fourier::new(*field.grid()).forward(field)
}

pub fn inverse(spec: &SpectralField) -> Result<ScalarField> {
    Fourier::new(spec.grid).inverse(spec)
}

/// `(-Laplacian)^{alpha/2}` as the multiplier `|k|^alpha`.
pub fn fractional_laplacian(field: &ScalarField, alpha: f64) -> Result<ScalarField> {
    check_range("alpha", alpha, alpha > 0.0 && alpha <= 2.0, "(0, 2]")?;
    fractional_power(field, alpha)
}

/// Multiplier `|k|^s` for any `s > 0`.
pub fn fractional_power(field: &ScalarField, s: f64) -> Result<ScalarField> {
    check_range("s", s, s > 0.0 && s.is_finite(), "positive")?;
    let table = power_table(field.grid(), s);
    Fourier::new(*field.grid()).filter(field, &table)
}

/// Exact flow of `d/dt f + (-Laplacian)^{alpha/2} f = 0` over time `t`.
pub fn diffusion_semigroup(field: &ScalarField, alpha: f64, t: f64) -> Result<ScalarField> {
    check_range("alpha", alpha, alpha > 0.0 && alpha <= 2.0, "(0, 2]")?;
    check_range("t", t, t >= 0.0 && t.is_finite(), "non-negative")?;
    if t == 0.0 {
        return Ok(field.clone());
    }
    let table = heat_table(field.grid(), alpha, t);
    Fourier::new(*field.grid()).filter(field, &table)
}

/// True when some component satisfies `3|m_i| >= N`.
pub fn is_aliased(grid: &GridSpec, index: usize) -> bool {
    let n = grid.points() as i64;
    let m = mode_vector(grid, index);
    m.iter().any(|mi| 3 * mi.abs() >= n)
}

/// Two-thirds rule: zero every mode with some `|m_i| >= N/3`.
pub fn dealias(spec: &SpectralField) -> SpectralField {
    let mut out = spec.clone();
    dealias_in_place(&mut out);
    out
}

pub fn dealias_in_place(spec: &mut SpectralField) {
    let grid = spec.grid;
    for (idx, c) in spec.coefficients.iter_mut().enumerate() {
        if is_aliased(&grid, idx) {
            *c = Complex64::new(0.0, 0.0);
        }
    }
}

/// `sum |k|^{2h} |F[m]|^2` scaled to the continuum value of
/// `integral |(-Laplacian)^{h/2} f|^2`.
pub fn sobolev_seminorm(field: &ScalarField, h: f64) -> Result<f64> {
    check_range("h", h, h > 0.0 && h.is_finite(), "positive")?;
    let spec = forward(field)?;
    Ok(seminorm_from_spectrum(&spec, h))
}

pub(crate) fn seminorm_from_spectrum(spec: &SpectralField, h: f64) -> f64 {
    let grid = spec.grid;
    let table = power_table(&grid, 2.0 * h);
    let sum = crate::grid::compensated_sum(
        spec.coefficients
            .iter()
            .zip(&table)
            .map(|(c, t)| t * c.norm_sqr()),
    );
    sum * grid.volume() / (grid.len() as f64).powi(2)
}

/// Spectral form of the quadrature `integral f g`.
pub fn spectral_inner(f: &SpectralField, g: &SpectralField) -> Result<f64> {
    if f.grid != g.grid {
        return Err(Error::GridMismatch);
    }
    let sum = crate::grid::compensated_sum(
        f.coefficients
            .iter()
            .zip(&g.coefficients)
            .map(|(a, b)| (a * b.conj()).re),
    );
    Ok(sum * f.grid.volume() / (f.grid.len() as f64).powi(2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(grid: GridSpec, seed: u64) -> ScalarField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..grid.len())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        ScalarField::new(grid, values).unwrap()
    }

    /// Direct O(N^2) DFT in one dimension.
    fn naive_dft(values: &[f64]) -> Vec<Complex64> {
        let n = values.len();
        (0..n)
            .map(|m| {
                values
                    .iter()
                    .enumerate()
                    .map(|(j, &v)| {
                        let ph = -2.0 * PI * (m * j) as f64 / n as f64;
                        v * Complex64::new(ph.cos(), ph.sin())
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn constant_maps_to_zero_mode() {
        let g = GridSpec::new(2, 8, 3.0).unwrap();
        let s = forward(&ScalarField::constant(g, 2.5)).unwrap();
        assert!((s.at([0, 0]).re - 2.5 * 64.0).abs() < 1e-12);
        for c in &s.coefficients()[1..] {
            assert!(c.norm() < 1e-12);
        }
    }

    #[test]
    fn single_cosine_occupies_plus_minus_one() {
        let g = GridSpec::new(1, 16, 2.0).unwrap();
        let f = ScalarField::from_fn(g, |x| (PI * x[0]).cos()).unwrap();
        let s = forward(&f).unwrap();
        for m in -8..8 {
            let c = s.at([m, 0]).norm();
            if m.abs() == 1 {
                assert!((c - 8.0).abs() < 1e-12);
            } else {
                assert!(c < 1e-12);
            }
        }
    }

    #[test]
    fn matches_naive_dft_and_round_trips() {
        let g = GridSpec::new(1, 64, 1.0).unwrap();
        let f = random_field(g, 3);
        let s = forward(&f).unwrap();
        let reference = naive_dft(f.values());
        for (a, b) in s.coefficients().iter().zip(&reference) {
            assert!((a - b).norm() < 1e-11);
        }
        let back = inverse(&s).unwrap();
        assert!(back.relative_l2_error(&f).unwrap() < 1e-12);
    }

    #[test]
    fn two_dimensional_matches_separable_naive_dft() {
        let g = GridSpec::new(2, 8, 1.0).unwrap();
        let f = random_field(g, 9);
        let s = forward(&f).unwrap();
        for m0 in 0..8usize {
            for m1 in 0..8usize {
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..8usize {
                    for j in 0..8usize {
                        let ph = -2.0 * PI * ((m0 * i + m1 * j) as f64) / 8.0;
                        acc += f.values()[i * 8 + j] * Complex64::new(ph.cos(), ph.sin());
                    }
                }
                assert!((s.coefficients()[m0 * 8 + m1] - acc).norm() < 1e-11);
            }
        }
        assert!(inverse(&s).unwrap().relative_l2_error(&f).unwrap() < 1e-12);
    }

    #[test]
    fn cosine_is_eigenfunction() {
        let g = GridSpec::new(1, 32, 4.0).unwrap();
        let k = 2.0 * PI / 4.0;
        let f = ScalarField::from_fn(g, |x| (k * x[0]).cos()).unwrap();
        for alpha in [0.3, 1.0, 1.7, 2.0] {
            let lf = fractional_laplacian(&f, alpha).unwrap();
            let expect = f.scaled(k.powf(alpha));
            assert!(lf.max_abs_diff(&expect).unwrap() < 1e-12);
        }
        assert!(fractional_laplacian(&f, 0.0).is_err());
        assert!(fractional_laplacian(&f, 2.5).is_err());
    }

    #[test]
    fn laplacian_of_constant_vanishes() {
        let g = GridSpec::new(2, 16, 1.0).unwrap();
        let lf = fractional_laplacian(&ScalarField::constant(g, 7.0), 1.3).unwrap();
        assert!(lf.sup_norm() < 1e-12);
    }

    /// Second-order centered difference Laplacian, d=1.
    fn fd_laplacian(f: &ScalarField) -> ScalarField {
        let n = f.len();
        let h2 = f.grid().spacing().powi(2);
        let v = f.values();
        let out = (0..n)
            .map(|i| -(v[(i + 1) % n] - 2.0 * v[i] + v[(i + n - 1) % n]) / h2)
            .collect();
        ScalarField::new(*f.grid(), out).unwrap()
    }

    #[test]
    fn alpha_two_agrees_with_finite_differences_at_second_order() {
        let profile = |x: f64| (2.0 * PI * x).sin().exp() + 0.3 * (6.0 * PI * x).cos();
        let err = |n: usize| {
            let g = GridSpec::new(1, n, 1.0).unwrap();
            let f = ScalarField::from_fn(g, |x| profile(x[0])).unwrap();
            let a = fractional_laplacian(&f, 2.0).unwrap();
            a.max_abs_diff(&fd_laplacian(&f)).unwrap()
        };
        let (e1, e2) = (err(64), err(128));
        let order = (e1 / e2).log2();
        assert!((order - 2.0).abs() < 0.1, "order {order}");
    }

    #[test]
    fn semigroup_identity_and_single_mode_decay() {
        let g = GridSpec::new(1, 32, 2.0).unwrap();
        let f = random_field(g, 1);
        assert_eq!(diffusion_semigroup(&f, 1.0, 0.0).unwrap(), f);
        let k = PI;
        let c = ScalarField::from_fn(g, |x| (k * x[0]).cos()).unwrap();
        let out = diffusion_semigroup(&c, 0.7, 0.3).unwrap();
        let expect = c.scaled((-0.3 * k.powf(0.7)).exp());
        assert!(out.max_abs_diff(&expect).unwrap() < 1e-13);
        assert!(diffusion_semigroup(&f, 1.0, -1.0).is_err());
    }

    #[test]
    fn semigroup_composes() {
        let g = GridSpec::new(2, 16, 1.0).unwrap();
        let f = random_field(g, 5);
        let a =
            diffusion_semigroup(&diffusion_semigroup(&f, 1.2, 0.01).unwrap(), 1.2, 0.02).unwrap();
        let b = diffusion_semigroup(&f, 1.2, 0.03).unwrap();
        assert!(a.max_abs_diff(&b).unwrap() < 1e-13);
        assert!((b.mean() - f.mean()).abs() < 1e-14);
        assert!(b.l2_norm() <= f.l2_norm());
    }

    #[test]
    fn dealias_keeps_twenty_one_modes_at_n32() {
        let g = GridSpec::new(1, 32, 1.0).unwrap();
        let s = SpectralField::new(g, vec![Complex64::new(1.0, 0.5); 32]).unwrap();
        let d = dealias(&s);
        let alive = d.coefficients().iter().filter(|c| c.norm() > 0.0).count();
        assert_eq!(alive, 21);
        assert_eq!(dealias(&d), d);
    }

    #[test]
    fn seminorm_of_single_mode() {
        let g = GridSpec::new(1, 64, 4.0).unwrap();
        let k = 3.0 * 2.0 * PI / 4.0;
        let f = ScalarField::from_fn(g, |x| (k * x[0]).sin()).unwrap();
        let h = 0.35;
        let got = sobolev_seminorm(&f, h).unwrap();
        let expect = k.powf(2.0 * h) * f.l2_norm().powi(2);
        assert!((got - expect).abs() < 1e-12 * expect);
        assert!(sobolev_seminorm(&ScalarField::constant(g, 1.0), h).unwrap() < 1e-20);
        assert!(sobolev_seminorm(&f, 0.0).is_err());
    }

    #[test]
    fn seminorm_is_self_adjoint_quadrature() {
        let g = GridSpec::new(2, 32, 2.0).unwrap();
        let f = random_field(g, 11).mean_free();
        for h in [0.25, 0.5, 0.9] {
            let a = sobolev_seminorm(&f, h).unwrap();
            let b = f
                .inner(&fractional_laplacian(&f, 2.0 * h).unwrap())
                .unwrap();
            assert!((a - b).abs() <= 1e-10 * a, "h={h}: {a} vs {b}");
        }
    }

    #[test]
    fn parseval() {
        let g = GridSpec::new(2, 16, 1.5).unwrap();
        let (f, h) = (random_field(g, 2), random_field(g, 4));
        let q = f.inner(&h).unwrap();
        let s = spectral_inner(&forward(&f).unwrap(), &forward(&h).unwrap()).unwrap();
        assert!((q - s).abs() <= 1e-12 * q.abs().max(1e-300));
    }
}
