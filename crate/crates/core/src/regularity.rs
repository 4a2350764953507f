//! Hölder seminorm estimators: testing against a dictionary of atoms, and
//! direct difference quotients.

use serde::{Deserialize, Serialize};

use crate::atoms::{build_canonical_atom_at, build_random_atom, convolve, Atom, AtomParams};
use crate::error::{check_range, Error, Result};
use crate::grid::{GridSpec, Point, ScalarField};
use crate::spectral::Fourier;
use crate::velocity::holder_norm;

/// Fixed family of atoms over dyadic radii, centers and two profiles.
#[derive(Debug, Clone)]
pub struct AtomDictionary {
    atoms: Vec<Atom>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DictionarySpec {
    /// Radii `2^{-1} .. 2^{-levels}`, keeping only those of at least 8 cells.
    pub levels: usize,
    /// Centers per radius: evenly spaced in d=1, a square lattice in d=2.
    pub centers: usize,
    pub seed: u64,
}

impl Default for DictionarySpec {
    fn default() -> Self {
        Self {
            levels: 5,
            centers: 16,
            seed: 0,
        }
    }
}

impl AtomDictionary {
    pub fn from_atoms(atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Empty("dictionary"));
        }
        Ok(Self { atoms })
    }

    /// Canonical and random atoms with `p = 2` on `grid`.
    pub fn build(grid: &GridSpec, params: &AtomParams, spec: &DictionarySpec) -> Result<Self> {
        let params = AtomParams { p: 2.0, ..*params };
        let h = grid.spacing();
        let centers = lattice(grid, spec.centers);
        let mut atoms = Vec::new();
        for level in 1..=spec.levels {
            let r = 0.5f64.powi(level as i32);
            if r < 8.0 * h {
                continue;
            }
            for (k, &c) in centers.iter().enumerate() {
                atoms.push(build_canonical_atom_at(grid, r, &params, c)?);
                let seed = spec
                    .seed
                    .wrapping_mul(1_000_003)
                    .wrapping_add((level * 1000 + k) as u64);
                atoms.push(build_random_atom(grid, r, &params, seed)?);
            }
        }
        Self::from_atoms(atoms)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Smallest `c` with `holder_atomic <= c * holder_direct` for every
    /// field on this grid.
    ///
    /// For an atom with node center `x0`,
    /// `|<f, phi>| <= [f] * sum |x - x0|^beta |phi(x)| h^d`, minimized over
    /// `x0`. The direct estimator only sees offsets up to a quarter period
    /// along axes and diagonals; splitting a longer offset into two halves
    /// costs `2^{1-beta}`, and combining two axis steps in d=2 costs
    /// `2^{1-beta/2}`.
    pub fn equivalence_constant(&self, beta: f64) -> Result<f64> {
        check_range("beta", beta, beta > 0.0 && beta < 1.0, "(0, 1)")?;
        let grid = *self.atoms[0].field.grid();
        let fourier = Fourier::new(grid);
        let kernel = ScalarField::from_fn(grid, |x| grid.distance([0.0, 0.0], x).powf(beta))?;
        let mut worst = 0.0f64;
        for a in &self.atoms {
            let moments = convolve(&fourier, &a.field.abs(), &kernel)?;
            let best = moments.min().max(0.0) * grid.cell_volume();
            worst = worst.max(best / a.r.powf(beta));
        }
        let mut c = worst * 2f64.powf(1.0 - beta);
        if grid.dimension() == 2 {
            c *= 2f64.powf(1.0 - 0.5 * beta);
        }
        Ok(c)
    }
}

fn lattice(grid: &GridSpec, count: usize) -> Vec<Point> {
    let l = grid.length();
    let h = grid.spacing();
    let snap = |x: f64| (x / h).round() * h;
    match grid.dimension() {
        1 => (0..count)
            .map(|i| [snap(l * (i as f64 + 0.5) / count as f64), 0.0])
            .collect(),
        _ => {
            let side = (count as f64).sqrt().ceil() as usize;
            (0..count)
                .map(|i| {
                    let (a, b) = (i / side, i % side);
                    [
                        snap(l * (a as f64 + 0.5) / side as f64),
                        snap(l * (b as f64 + 0.5) / side as f64),
                    ]
                })
                .collect()
        }
    }
}

/// `max r^{-beta} |integral f phi|` over the dictionary.
pub fn holder_atomic(f: &ScalarField, beta: f64, dict: &AtomDictionary) -> Result<f64> {
    check_range("beta", beta, beta > 0.0 && beta < 1.0, "(0, 1)")?;
    let mut best = 0.0f64;
    for a in &dict.atoms {
        best = best.max(f.inner(&a.field)?.abs() / a.r.powf(beta));
    }
    Ok(best)
}

/// Difference-quotient `C^beta` seminorm.
pub fn holder_direct(f: &ScalarField, beta: f64) -> Result<f64> {
    Ok(holder_norm(f, beta)?.seminorm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
    /// Coefficient of determination of the log-log regression.
    pub r2: f64,
}

/// Least-squares fit of `log value = log prefactor + exponent log t`.
pub fn fit_power_law(series: &[(f64, f64)]) -> Result<PowerLawFit> {
    if series.len() < 5 {
        return Err(Error::Malformed(format!(
            "power-law fit needs at least 5 points, got {}",
            series.len()
        )));
    }
    if let Some(&(t, v)) = series.iter().find(|(t, v)| !(*t > 0.0 && *v > 0.0)) {
        return Err(Error::Malformed(format!("non-positive sample ({t}, {v})")));
    }
    let n = series.len() as f64;
    let xs: Vec<f64> = series.iter().map(|(t, _)| t.ln()).collect();
    let ys: Vec<f64> = series.iter().map(|(_, v)| v.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Malformed("all sample times coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r2 = if ss_tot <= 1e-30 * n {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(PowerLawFit {
        exponent: slope,
        prefactor: intercept.exp(),
        r2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let s: Vec<_> = (1..=8)
            .map(|i| (i as f64 * 0.1, 3.0 * (i as f64 * 0.1).powf(-2.0)))
            .collect();
        let f = fit_power_law(&s).unwrap();
        assert!((f.exponent + 2.0).abs() < 1e-10);
        assert!((f.prefactor - 3.0).abs() < 1e-10);
        assert!((f.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_series_has_zero_exponent() {
        let s: Vec<_> = (1..=6).map(|i| (i as f64, 4.0)).collect();
        let f = fit_power_law(&s).unwrap();
        assert!(f.exponent.abs() < 1e-12);
    }

    #[test]
    fn rejects_short_or_nonpositive() {
        assert!(fit_power_law(&[(1.0, 1.0); 4]).is_err());
        let mut s: Vec<_> = (1..=6).map(|i| (i as f64, 1.0)).collect();
        s[2].1 = 0.0;
        assert!(fit_power_law(&s).is_err());
    }

    #[test]
    fn exponential_decay_is_not_a_power_law() {
        // sup norm of the heat flow of a single mode: exp(-t |k|^alpha).
        let k = 2.0 * std::f64::consts::PI;
        let s: Vec<_> = (0..20)
            .map(|i| {
                let t = 0.05 + 0.1 * i as f64;
                (t, (-t * k).exp())
            })
            .collect();
        assert!(fit_power_law(&s).unwrap().r2 < 0.9);
    }

    #[test]
    fn lattice_counts() {
        let g = GridSpec::new(2, 64, 4.0).unwrap();
        assert_eq!(lattice(&g, 16).len(), 16);
        let g = GridSpec::new(1, 64, 4.0).unwrap();
        assert_eq!(lattice(&g, 16).len(), 16);
    }
}
