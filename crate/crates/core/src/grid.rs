//! Periodic lattices on the flat torus and real fields sampled on them.
//!
//! Values are stored row-major with the last axis varying fastest. Physical
//! frequencies follow `xi = 2 pi k / side_length` with `k` in the symmetric
//! integer range `-n/2 < k <= n/2` on every axis.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Uniform periodic grid on `[0, L)^dim`.
#[derive(Clone)]
pub struct Grid {
    inner: Arc<GridInner>,
}

struct GridInner {
    dim: usize,
    n: usize,
    side: f64,
    spacing: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    xi_sq: Vec<f64>,
}

impl Grid {
    pub fn new(dim: usize, points_per_axis: usize, side_length: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::invalid("dim", format!("must be 1, 2 or 3 (got {dim})")));
        }
        if points_per_axis < 2 || !points_per_axis.is_power_of_two() {
            return Err(Error::invalid(
                "points_per_axis",
                format!("must be a power of two >= 2 (got {points_per_axis})"),
            ));
        }
        if !(side_length.is_finite() && side_length > 0.0) {
            return Err(Error::invalid(
                "side_length",
                format!("must be positive and finite (got {side_length})"),
            ));
        }
        let n = points_per_axis;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);

        let base = 2.0 * PI / side_length;
        let len = n.pow(dim as u32);
        let mut xi_sq = Vec::with_capacity(len);
        for flat in 0..len {
            let mut s = 0.0;
            let mut rem = flat;
            for _ in 0..dim {
                let k = signed_wavenumber(rem % n, n) as f64 * base;
                s += k * k;
                rem /= n;
            }
            xi_sq.push(s);
        }

        Ok(Grid {
            inner: Arc::new(GridInner {
                dim,
                n,
                side: side_length,
                spacing: side_length / n as f64,
                forward,
                inverse,
                xi_sq,
            }),
        })
    }

    /// Grid on the standard torus of side `2 pi`.
    pub fn periodic(dim: usize, points_per_axis: usize) -> Result<Self> {
        Self::new(dim, points_per_axis, 2.0 * PI)
    }

    pub fn dim(&self) -> usize {
        self.inner.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.inner.n
    }

    pub fn side_length(&self) -> f64 {
        self.inner.side
    }

    pub fn spacing(&self) -> f64 {
        self.inner.spacing
    }

    /// Total number of grid points, `points_per_axis^dim`.
    pub fn len(&self) -> usize {
        self.inner.xi_sq.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight of a single point, `spacing^dim`.
    pub fn cell_volume(&self) -> f64 {
        self.inner.spacing.powi(self.inner.dim as i32)
    }

    /// Measure of the torus, `side_length^dim`.
    pub fn total_volume(&self) -> f64 {
        self.inner.side.powi(self.inner.dim as i32)
    }

    /// Smallest nonzero physical frequency, `2 pi / side_length`.
    pub fn min_frequency(&self) -> f64 {
        2.0 * PI / self.inner.side
    }

    /// Per-axis indices of a flat index; unused trailing axes are zero.
    pub fn multi_index(&self, flat: usize) -> [usize; 3] {
        let n = self.inner.n;
        let mut out = [0usize; 3];
        let mut rem = flat;
        for axis in (0..self.inner.dim).rev() {
            out[axis] = rem % n;
            rem /= n;
        }
        out
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        let n = self.inner.n;
        idx.iter()
            .take(self.inner.dim)
            .fold(0, |acc, &i| acc * n + (i % n))
    }

    /// Physical coordinates of a grid point; unused trailing axes are zero.
    pub fn coords(&self, flat: usize) -> [f64; 3] {
        let idx = self.multi_index(flat);
        let h = self.inner.spacing;
        [idx[0] as f64 * h, idx[1] as f64 * h, idx[2] as f64 * h]
    }

    /// Signed integer wavenumbers of a flat spectral index.
    pub fn wavenumbers(&self, flat: usize) -> [i64; 3] {
        let n = self.inner.n;
        let idx = self.multi_index(flat);
        let mut k = [0i64; 3];
        for axis in 0..self.inner.dim {
            k[axis] = signed_wavenumber(idx[axis], n);
        }
        k
    }

    /// `|xi|^2` for every flat spectral index.
    pub fn xi_squared(&self) -> &[f64] {
        &self.inner.xi_sq
    }

    pub(crate) fn fft_forward(&self) -> &Arc<dyn Fft<f64>> {
        &self.inner.forward
    }

    pub(crate) fn fft_inverse(&self) -> &Arc<dyn Fft<f64>> {
        &self.inner.inverse
    }

    /// In-place unnormalized n-dimensional transform, axis by axis.
    pub(crate) fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.inner.n;
        let dim = self.inner.dim;
        let plan = if inverse {
            self.fft_inverse()
        } else {
            self.fft_forward()
        };
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        if dim == 1 {
            plan.process_with_scratch(data, &mut scratch);
            return;
        }
        let mut line = vec![Complex64::default(); n];
        for axis in 0..dim {
            let stride = n.pow((dim - 1 - axis) as u32);
            let block = stride * n;
            for start in 0..data.len() / n {
                // start enumerates lines: split into (outer, inner) around the axis
                let outer = start / stride;
                let inner = start % stride;
                let base = outer * block + inner;
                for (j, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + j * stride];
                }
                plan.process_with_scratch(&mut line, &mut scratch);
                for (j, v) in line.iter().enumerate() {
                    data[base + j * stride] = *v;
                }
            }
        }
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.dim == other.inner.dim
                && self.inner.n == other.inner.n
                && self.inner.side == other.inner.side)
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.inner.dim)
            .field("points_per_axis", &self.inner.n)
            .field("side_length", &self.inner.side)
            .finish()
    }
}

pub(crate) fn signed_wavenumber(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Real field sampled on a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::SizeMismatch {
                expected: grid.len(),
                actual: values.len(),
            });
        }
        Ok(Field {
            grid: grid.clone(),
            values,
        })
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        Field {
            grid: grid.clone(),
            values: vec![c; grid.len()],
        }
    }

    /// Samples `f` at the physical coordinates of every grid point.
    pub fn from_fn(grid: &Grid, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let dim = grid.dim();
        let values = (0..grid.len()).map(|i| f(&grid.coords(i)[..dim])).collect();
        Field {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &Grid {
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

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.check_same_grid(other)?;
        Ok(Field {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn scale(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Field) -> Result<Field> {
        self.zip_map(other, |a, b| a * b)
    }

    /// Quadrature integral over the torus. Summation runs in index order.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// `integral(self * other)`.
    pub fn inner(&self, other: &Field) -> Result<f64> {
        self.check_same_grid(other)?;
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        Ok(s * self.grid.cell_volume())
    }

    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if !(p >= 1.0) {
            return Err(Error::invalid("p", format!("Lp norms need p >= 1 (got {p})")));
        }
        if p.is_infinite() {
            return Ok(self.values.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        }
        let s: f64 = self.values.iter().map(|v| v.abs().powf(p)).sum();
        Ok((s * self.grid.cell_volume()).powf(1.0 / p))
    }

    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.values.iter().map(|v| v * v).sum();
        (s * self.grid.cell_volume()).sqrt()
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn inf(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mean(&self) -> f64 {
        self.integral() / self.grid.total_volume()
    }

    /// True when every value equals the first bit for bit.
    pub fn is_constant(&self) -> bool {
        let first = self.values[0];
        self.values.iter().all(|&v| v == first)
    }

    pub(crate) fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    pub(crate) fn from_parts(grid: Grid, values: Vec<f64>) -> Field {
        debug_assert_eq!(grid.len(), values.len());
        Field { grid, values }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_power_of_two() {
        assert!(matches!(
            Grid::periodic(1, 48),
            Err(Error::InvalidParameter {
                name: "points_per_axis",
                ..
            })
        ));
        assert!(Grid::periodic(4, 8).is_err());
        assert!(Grid::new(1, 8, 0.0).is_err());
    }

    #[test]
    fn index_round_trip() {
        let g = Grid::periodic(3, 4).unwrap();
        for flat in 0..g.len() {
            let idx = g.multi_index(flat);
            assert_eq!(g.flat_index(&idx), flat);
        }
        assert_eq!(g.len(), 64);
    }

    #[test]
    fn integral_of_constant_is_exact() {
        let g = Grid::periodic(2, 16).unwrap();
        let one = Field::constant(&g, 1.0);
        let expected = (2.0 * PI).powi(2);
        assert!((one.integral() - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn integral_of_cosine_vanishes() {
        let g = Grid::periodic(1, 32).unwrap();
        let f = Field::from_fn(&g, |x| x[0].cos());
        assert!(f.integral().abs() < 1e-14);
    }

    #[test]
    fn l2_norm_of_shifted_cosine() {
        let g = Grid::periodic(1, 64).unwrap();
        let f = Field::from_fn(&g, |x| 1.0 + 0.5 * x[0].cos());
        // (1 + 0.5 cos)^2 = 1 + cos + 0.125 (1 + cos 2x)
        let expected = (2.0 * PI * 1.125).sqrt();
        assert!((f.lp_norm(2.0).unwrap() - expected).abs() < 1e-13);
        assert!((f.l2_norm() - expected).abs() < 1e-13);
    }

    #[test]
    fn lp_norm_rejects_small_p() {
        let g = Grid::periodic(1, 8).unwrap();
        assert!(Field::zeros(&g).lp_norm(0.5).is_err());
    }

    #[test]
    fn size_mismatch_is_an_error() {
        let g = Grid::periodic(1, 8).unwrap();
        assert!(matches!(
            Field::new(&g, vec![0.0; 7]),
            Err(Error::SizeMismatch {
                expected: 8,
                actual: 7
            })
        ));
    }

    #[test]
    fn sup_inf() {
        let g = Grid::periodic(1, 64).unwrap();
        let f = Field::from_fn(&g, |x| 2.0 + x[0].cos());
        assert_eq!(f.sup(), 3.0);
        assert!((f.inf() - 1.0).abs() < 1e-15);
    }
}
