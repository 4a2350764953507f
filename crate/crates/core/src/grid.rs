//! Uniform periodic grids and real sampled fields.
//!
//! Fields are stored row-major: in two dimensions the value at node
//! `(i, j)` lives at `i * n + j`, with `i` running along the first axis.
//! Node `i` sits at physical coordinate `i * h`, `h = L / n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A physical position. In one dimension the second coordinate is ignored.
pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid", into = "RawGrid")]
pub struct GridSpec {
    dimension: usize,
    points: usize,
    length: f64,
}

#[derive(Serialize, Deserialize)]
struct RawGrid {
    dimension: usize,
    points: usize,
    length: f64,
}

impl TryFrom<RawGrid> for GridSpec {
    type Error = Error;

    fn try_from(raw: RawGrid) -> Result<Self> {
        GridSpec::new(raw.dimension, raw.points, raw.length)
    }
}

impl From<GridSpec> for RawGrid {
    fn from(g: GridSpec) -> Self {
        RawGrid {
            dimension: g.dimension,
            points: g.points,
            length: g.length,
        }
    }
}

impl GridSpec {
    pub fn new(dimension: usize, points: usize, length: f64) -> Result<Self> {
        if !(1..=2).contains(&dimension) {
            return Err(Error::InvalidGrid(format!(
                "dimension {dimension} not in {{1, 2}}"
            )));
        }
        if points < 8 || !points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "{points} points per axis; need a power of two >= 8"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!("box length {length}")));
        }
        Ok(Self {
            dimension,
            points,
            length,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.points as f64
    }

    /// Total number of nodes, `n^d`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dimension as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight of a single node, `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dimension as i32)
    }

    pub fn volume(&self) -> f64 {
        self.length.powi(self.dimension as i32)
    }

    /// Per-axis integer coordinates of a flat index.
    pub fn unflatten(&self, index: usize) -> [usize; 2] {
        match self.dimension {
            1 => [index, 0],
            _ => [index / self.points, index % self.points],
        }
    }

    pub fn flatten(&self, idx: [usize; 2]) -> usize {
        match self.dimension {
            1 => idx[0],
            _ => idx[0] * self.points + idx[1],
        }
    }

    /// Physical position of node `index`.
    pub fn position(&self, index: usize) -> Point {
        let [i, j] = self.unflatten(index);
        let h = self.spacing();
        match self.dimension {
            1 => [i as f64 * h, 0.0],
            _ => [i as f64 * h, j as f64 * h],
        }
    }

    pub fn center(&self) -> Point {
        let c = 0.5 * self.length;
        match self.dimension {
            1 => [c, 0.0],
            _ => [c, c],
        }
    }

    /// Minimum-image displacement `b - a` on the torus.
    pub fn displacement(&self, a: Point, b: Point) -> Point {
        let mut z = [0.0; 2];
        for (axis, zi) in z.iter_mut().enumerate().take(self.dimension) {
            *zi = wrap_signed(b[axis] - a[axis], self.length);
        }
        z
    }

    pub fn distance(&self, a: Point, b: Point) -> f64 {
        let z = self.displacement(a, b);
        (z[0] * z[0] + z[1] * z[1]).sqrt()
    }

    /// Reduce a position into the fundamental cell `[0, L)^d`.
    pub fn wrap(&self, x: Point) -> Point {
        let mut out = [0.0; 2];
        for axis in 0..self.dimension {
            out[axis] = x[axis].rem_euclid(self.length);
            if out[axis] >= self.length {
                out[axis] = 0.0;
            }
        }
        out
    }

    /// Grid with the same box and dimension but a different resolution.
    pub fn with_points(&self, points: usize) -> Result<Self> {
        Self::new(self.dimension, points, self.length)
    }
}

/// Signed representative of `x` modulo `period` in `[-period/2, period/2)`.
pub fn wrap_signed(x: f64, period: f64) -> f64 {
    let half = 0.5 * period;
    (x + half).rem_euclid(period) - half
}

/// Compensated (Neumaier) sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::SizeMismatch {
                expected: grid.len(),
                actual: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { grid, values })
    }

    /// Skips the finiteness scan; callers guarantee the invariant.
    pub(crate) fn from_raw(grid: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: GridSpec, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: GridSpec, f: impl Fn(Point) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(grid.position(i))).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check_same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Quadrature of the field over the torus (compensated).
    pub fn integral(&self) -> f64 {
        compensated_sum(self.values.iter().copied()) * self.grid.cell_volume()
    }

    pub fn mean(&self) -> f64 {
        compensated_sum(self.values.iter().copied()) / self.values.len() as f64
    }

    /// Quadrature of `self * other`.
    pub fn inner(&self, other: &ScalarField) -> Result<f64> {
        self.check_same_grid(other)?;
        let s = compensated_sum(self.values.iter().zip(&other.values).map(|(a, b)| a * b));
        Ok(s * self.grid.cell_volume())
    }

    /// Discrete `L^p` norm; `p = f64::INFINITY` gives the sup norm.
    pub fn lp_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.sup_norm();
        }
        if p == 1.0 {
            return self.l1_norm();
        }
        if p == 2.0 {
            return self.l2_norm();
        }
        let s = compensated_sum(self.values.iter().map(|v| v.abs().powf(p)));
        (s * self.grid.cell_volume()).powf(1.0 / p)
    }

    pub fn l1_norm(&self) -> f64 {
        compensated_sum(self.values.iter().map(|v| v.abs())) * self.grid.cell_volume()
    }

    pub fn l2_norm(&self) -> f64 {
        (compensated_sum(self.values.iter().map(|v| v * v)) * self.grid.cell_volume()).sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> ScalarField {
        self.map(|v| c * v)
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &ScalarField) -> Result<ScalarField> {
        self.check_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + c * b)
            .collect();
        Ok(ScalarField {
            grid: self.grid,
            values,
        })
    }

    pub fn positive_part(&self) -> ScalarField {
        self.map(|v| v.max(0.0))
    }

    /// `x_- = (-x)_+`.
    pub fn negative_part(&self) -> ScalarField {
        self.map(|v| (-v).max(0.0))
    }

    pub fn abs(&self) -> ScalarField {
        self.map(f64::abs)
    }

    /// Subtracts the mean so the result integrates to zero.
    pub fn mean_free(&self) -> ScalarField {
        let m = self.mean();
        self.map(|v| v - m)
    }

    /// Cyclic shift by whole cells: `out[x] = self[x - shift]`.
    pub fn rolled(&self, shift: [isize; 2]) -> ScalarField {
        let n = self.grid.points as isize;
        let mut out = vec![0.0; self.values.len()];
        for (idx, slot) in out.iter_mut().enumerate() {
            let [i, j] = self.grid.unflatten(idx);
            let si = (i as isize - shift[0]).rem_euclid(n) as usize;
            let sj = if self.grid.dimension == 2 {
                (j as isize - shift[1]).rem_euclid(n) as usize
            } else {
                0
            };
            *slot = self.values[self.grid.flatten([si, sj])];
        }
        ScalarField {
            grid: self.grid,
            values: out,
        }
    }

    /// Largest absolute difference with another field on the same grid.
    pub fn max_abs_diff(&self, other: &ScalarField) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Relative discrete `L^2` distance `|self - other| / |other|`.
    pub fn relative_l2_error(&self, reference: &ScalarField) -> Result<f64> {
        let diff = self.axpy(-1.0, reference)?;
        let denom = reference.l2_norm();
        Ok(if denom == 0.0 {
            diff.l2_norm()
        } else {
            diff.l2_norm() / denom
        })
    }

    /// Multilinear interpolation at an arbitrary position.
    pub fn interpolate(&self, x: Point) -> f64 {
        let n = self.grid.points;
        let h = self.grid.spacing();
        let locate = |coord: f64| {
            let s = coord.rem_euclid(self.grid.length) / h;
            let i0 = (s.floor() as usize) % n;
            let frac = s - s.floor();
            (i0, (i0 + 1) % n, frac)
        };
        match self.grid.dimension {
            1 => {
                let (i0, i1, t) = locate(x[0]);
                (1.0 - t) * self.values[i0] + t * self.values[i1]
            }
            _ => {
                let (i0, i1, tx) = locate(x[0]);
                let (j0, j1, ty) = locate(x[1]);
                let v = |i, j| self.values[i * n + j];
                (1.0 - tx) * ((1.0 - ty) * v(i0, j0) + ty * v(i0, j1))
                    + tx * ((1.0 - ty) * v(i1, j0) + ty * v(i1, j1))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid1(n: usize) -> GridSpec {
        GridSpec::new(1, n, 4.0).unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(GridSpec::new(3, 16, 1.0).is_err());
        assert!(GridSpec::new(1, 4, 1.0).is_err());
        assert!(GridSpec::new(1, 24, 1.0).is_err());
        assert!(GridSpec::new(2, 16, 0.0).is_err());
        let g = GridSpec::new(2, 16, 2.0).unwrap();
        assert_eq!(g.len(), 256);
        assert_eq!(g.spacing() * 16.0, 2.0);
    }

    #[test]
    fn rejects_non_finite_and_wrong_length() {
        let g = grid1(8);
        assert!(ScalarField::new(g, vec![0.0; 7]).is_err());
        let mut v = vec![0.0; 8];
        v[3] = f64::NAN;
        assert!(matches!(
            ScalarField::new(g, v),
            Err(Error::NonFinite { index: 3 })
        ));
    }

    #[test]
    fn pos_neg_decomposition_is_exact() {
        let g = grid1(64);
        let f = ScalarField::from_fn(g, |x| (3.0 * x[0]).sin() * x[0]).unwrap();
        let (p, m) = (f.positive_part(), f.negative_part());
        for i in 0..f.len() {
            let x = f.values()[i];
            assert_eq!(p.values()[i] - m.values()[i], x);
            assert_eq!(p.values()[i] + m.values()[i], x.abs());
        }
    }

    #[test]
    fn minimum_image_distance() {
        let g = GridSpec::new(2, 8, 4.0).unwrap();
        assert!((g.distance([0.1, 0.0], [3.9, 0.0]) - 0.2).abs() < 1e-12);
        assert!((g.distance([0.0, 0.0], [2.0, 2.0]) - 8f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn roll_matches_index_shift() {
        let g = GridSpec::new(2, 8, 1.0).unwrap();
        let f = ScalarField::from_fn(g, |x| x[0] + 10.0 * x[1]).unwrap();
        let r = f.rolled([1, -2]);
        assert_eq!(r.values()[g.flatten([1, 0])], f.values()[g.flatten([0, 2])]);
    }

    #[test]
    fn interpolation_reproduces_nodes_and_linears() {
        let g = grid1(16);
        let f = ScalarField::from_fn(g, |x| x[0]).unwrap();
        assert!((f.interpolate([1.25, 0.0]) - 1.25).abs() < 1e-14);
        assert_eq!(f.interpolate(g.position(5)), f.values()[5]);
    }
}
