//! Slow, independent reference implementations.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{check_range, Error, Result};
use crate::grid::{compensated_sum, wrap_signed, GridSpec, Point, ScalarField};
use crate::spectral::{forward, inverse, SpectralField};

/// Largest grid the direct-sum references accept.
pub const MAX_DIRECT_POINTS: usize = 64;

/// Direct `O(N^{2d})` DFT with the unnormalized forward convention.
pub fn naive_dft(field: &ScalarField) -> Result<SpectralField> {
    let grid = *field.grid();
    if grid.points() > 4 * MAX_DIRECT_POINTS {
        return Err(Error::TooLarge {
            points: grid.points(),
            max: 4 * MAX_DIRECT_POINTS,
        });
    }
    let n = grid.points();
    let coeffs = (0..grid.len())
        .map(|out| {
            let [m0, m1] = grid.unflatten(out);
            let mut acc = Complex64::new(0.0, 0.0);
            for (idx, &v) in field.values().iter().enumerate() {
                let [i, j] = grid.unflatten(idx);
                let turns = ((m0 * i + m1 * j) % n) as f64 / n as f64;
                acc += v * Complex64::from_polar(1.0, -2.0 * PI * turns);
            }
            acc
        })
        .collect();
    SpectralField::new(grid, coeffs)
}

/// Periodized singular-kernel operator on a fixed grid.
///
/// `(L f)_i = c * sum_o W_o (f_i - f_{i+o})` with nonnegative weights `W`.
/// In one dimension `W` integrates `|y|^{-1-alpha}` over each cell, sums
/// `images` periodic copies on each side and adds an integral estimate of
/// the remaining copies. The excluded central cell enters as a
/// second-difference correction. In two dimensions the weights are nodal
/// samples of `|y|^{-2-alpha}` with the same central correction. The
/// constant `c` makes the lowest Fourier mode an exact eigenfunction with
/// eigenvalue `|k_1|^alpha`.
#[derive(Debug, Clone)]
pub struct KernelOperator {
    grid: GridSpec,
    weights: Vec<f64>,
    normalization: f64,
}

impl KernelOperator {
    pub fn new(grid: GridSpec, alpha: f64, images: usize) -> Result<Self> {
        check_range("alpha", alpha, alpha > 0.0 && alpha < 2.0, "(0, 2)")?;
        if grid.points() > MAX_DIRECT_POINTS {
            return Err(Error::TooLarge {
                points: grid.points(),
                max: MAX_DIRECT_POINTS,
            });
        }
        let weights = match grid.dimension() {
            1 => weights_1d(&grid, alpha, images),
            _ => weights_2d(&grid, alpha, images),
        };
        let n = grid.points();
        let symbol = compensated_sum(weights.iter().enumerate().map(|(o, w)| {
            let [o0, _] = grid.unflatten(o);
            w * (1.0 - (2.0 * PI * o0 as f64 / n as f64).cos())
        }));
        let k1 = 2.0 * PI / grid.length();
        Ok(Self {
            grid,
            weights,
            normalization: k1.powf(alpha) / symbol,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn apply(&self, f: &ScalarField) -> Result<ScalarField> {
        if *f.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        let grid = self.grid;
        let n = grid.points();
        let vals = f.values();
        let out = (0..grid.len())
            .map(|i| {
                let [i0, i1] = grid.unflatten(i);
                let terms = self.weights.iter().enumerate().map(|(o, &w)| {
                    let [o0, o1] = grid.unflatten(o);
                    let j = grid.flatten([(i0 + o0) % n, (i1 + o1) % n]);
                    w * (vals[i] - vals[j])
                });
                self.normalization * compensated_sum(terms)
            })
            .collect();
        ScalarField::new(grid, out)
    }

    /// `2 f L f - L(f^2)`; equals `c sum_o W_o (f_i - f_{i+o})^2` exactly
    /// in exact arithmetic.
    pub fn cordoba_defect(&self, f: &ScalarField) -> Result<ScalarField> {
        let lf = self.apply(f)?;
        let lf2 = self.apply(&f.map(|x| x * x))?;
        let vals = f
            .values()
            .iter()
            .zip(lf.values())
            .zip(lf2.values())
            .map(|((a, b), c)| 2.0 * a * b - c)
            .collect();
        ScalarField::new(self.grid, vals)
    }
}

fn weights_1d(grid: &GridSpec, alpha: f64, images: usize) -> Vec<f64> {
    let n = grid.points();
    let (h, l) = (grid.spacing(), grid.length());
    let p = images as f64;
    let mut w = vec![0.0; n];
    for (j, wj) in w.iter_mut().enumerate() {
        let z = wrap_signed(j as f64 * h, l);
        let mut acc = 0.0;
        for img in -(images as i64)..=(images as i64) {
            if img == 0 && j == 0 {
                continue;
            }
            let az = (z + img as f64 * l).abs();
            let lo = az - 0.5 * h;
            acc += (lo.powf(-alpha) - (az + 0.5 * h).powf(-alpha)) / alpha;
        }
        // Copies beyond `images`, replaced by the integral of the kernel.
        acc +=
            h / (alpha * l) * (((p + 0.5) * l + z).powf(-alpha) + ((p + 0.5) * l - z).powf(-alpha));
        *wj = acc;
    }
    let central = (0.5 * h).powf(2.0 - alpha) / (2.0 - alpha) / (h * h);
    w[1] += central;
    w[n - 1] += central;
    w
}

fn weights_2d(grid: &GridSpec, alpha: f64, images: usize) -> Vec<f64> {
    let (h, l) = (grid.spacing(), grid.length());
    let mut w = vec![0.0; grid.len()];
    let pi = images as i64;
    for (o, wo) in w.iter_mut().enumerate() {
        let [o0, o1] = grid.unflatten(o);
        let mut acc = 0.0;
        for a in -pi..=pi {
            for b in -pi..=pi {
                if o == 0 && a == 0 && b == 0 {
                    continue;
                }
                let z0 = wrap_signed(o0 as f64 * h, l) + a as f64 * l;
                let z1 = wrap_signed(o1 as f64 * h, l) + b as f64 * l;
                acc += h * h * (z0 * z0 + z1 * z1).powf(-1.0 - 0.5 * alpha);
            }
        }
        *wo = acc;
    }
    // Integral of y_1^2 |y|^{-2-alpha} over the central cell, in polar form.
    let steps = 4096;
    let moment: f64 = (0..steps)
        .map(|s| {
            let th = 2.0 * PI * (s as f64 + 0.5) / steps as f64;
            let r = 0.5 / th.cos().abs().max(th.sin().abs());
            th.cos().powi(2) * r.powf(2.0 - alpha) / (2.0 - alpha)
        })
        .sum::<f64>()
        * 2.0
        * PI
        / steps as f64;
    let central = 0.5 * moment * h.powf(2.0 - alpha) / (h * h);
    let n = grid.points();
    for nb in [[1, 0], [n - 1, 0], [0, 1], [0, n - 1]] {
        w[grid.flatten(nb)] += central;
    }
    w
}

/// Direct periodic-kernel evaluation of `(-Laplacian)^{alpha/2} f`.
pub fn kernel_fractional_laplacian(
    field: &ScalarField,
    alpha: f64,
    images: usize,
) -> Result<ScalarField> {
    KernelOperator::new(*field.grid(), alpha, images)?.apply(field)
}

/// `f(x - shift)` via spectral phase shift; exact for band-limited data.
pub fn exact_translation(field: &ScalarField, shift: Point) -> Result<ScalarField> {
    let mut spec = forward(field)?;
    spec.apply(|k, nyq| {
        let phase = -(k[0] * shift[0] + k[1] * shift[1]);
        if nyq {
            // The Nyquist row has no partner; keep the real part of the shift.
            Complex64::new(phase.cos(), 0.0)
        } else {
            Complex64::from_polar(1.0, phase)
        }
    });
    inverse(&spec)
}

/// `sum_m exp(-t |k|^alpha) F[theta](m) conj(F[psi](m))`, scaled to the
/// quadrature of `theta(t) psi`.
pub fn heat_pairing(theta0: &ScalarField, psi0: &ScalarField, alpha: f64, t: f64) -> Result<f64> {
    theta0.check_same_grid(psi0)?;
    let grid = *theta0.grid();
    let (a, b) = (naive_or_fast(theta0)?, naive_or_fast(psi0)?);
    let table = crate::spectral::heat_table(&grid, alpha, t);
    let sum = compensated_sum(
        a.coefficients()
            .iter()
            .zip(b.coefficients())
            .zip(&table)
            .map(|((x, y), m)| m * (x * y.conj()).re),
    );
    Ok(sum * grid.volume() / (grid.len() as f64).powi(2))
}

fn naive_or_fast(f: &ScalarField) -> Result<SpectralField> {
    if f.grid().len() <= MAX_DIRECT_POINTS * MAX_DIRECT_POINTS {
        naive_dft(f)
    } else {
        forward(f)
    }
}
