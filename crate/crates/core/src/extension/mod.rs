//! Weighted extension of a torus field into the half-cylinder
//! `T^n x (0, Y]` and the Dirichlet-to-Neumann map it induces.
//!
//! The extension `U` solves `div(y^a grad U) = 0` with `a = 1 - 2 gamma`,
//! `U(., 0) = f` and zero weighted flux at `y = Y`. The discretization is a
//! finite-volume scheme on nodes `y_0 = 0 < y_1 < ... < y_J = Y`:
//!
//! * vertical faces between `y_j` and `y_{j+1}` carry the coefficient
//!   `1 / int_{y_j}^{y_{j+1}} s^{-a} ds`, which is exact for the one-dimensional
//!   weighted-harmonic profile `y^{2 gamma}`;
//! * horizontal couplings on level `j` are the second-order periodic
//!   difference Laplacian scaled by the cell weight `int_{cell j} s^a ds`.
//!
//! Both weight integrals are evaluated in closed form, so `y^a` is never
//! sampled at `y = 0`. The assembled operator is a symmetric M-matrix.

mod harnack;

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;
use statrs::function::gamma::gamma as gamma_fn;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::linalg::{pcg, solve_tridiagonal, PcgOutcome};
use crate::params::validate_gamma;

pub use harnack::{check_harnack_fks, BoundaryData, HarnackExperiment, HarnackReport, ScaleResult};

/// `d*_gamma = -2^{2 gamma - 1} Gamma(gamma) / (gamma Gamma(-gamma))`, the
/// constant turning the weighted normal derivative into `(-Delta)^gamma`.
pub fn d_star(gamma: f64) -> Result<f64> {
    validate_gamma(gamma)?;
    Ok(-(2f64).powf(2.0 * gamma - 1.0) * gamma_fn(gamma) / (gamma * gamma_fn(-gamma)))
}

/// `int_s^t y^p dy` for `p > -1`, `0 <= s <= t`.
pub(crate) fn power_integral(s: f64, t: f64, p: f64) -> f64 {
    (t.powf(p + 1.0) - s.powf(p + 1.0)) / (p + 1.0)
}

/// Node layout in the extension variable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeshSpec {
    /// Number of intervals `J` in `y`.
    pub levels: usize,
    /// Truncation height in units of `1 / (smallest nonzero |xi|)`.
    pub height_factor: f64,
    /// Grading exponent: `y_j = Y (j / J)^beta`.
    pub beta: f64,
}

impl Default for MeshSpec {
    fn default() -> Self {
        MeshSpec {
            levels: 256,
            height_factor: 6.0,
            beta: 2.0,
        }
    }
}

/// Graded tensor mesh on `base x [0, Y]`.
#[derive(Debug)]
pub struct ExtensionMesh {
    base: Grid,
    gamma: f64,
    a: f64,
    beta: f64,
    y: Vec<f64>,
    /// `int` of `s^a` over the dual cell of each node.
    cell_weight: Vec<f64>,
    /// `1 / int s^{-a}` between consecutive nodes.
    face_coeff: Vec<f64>,
    neighbors: Vec<Vec<(usize, usize)>>,
}

impl ExtensionMesh {
    pub fn new(base: &Grid, gamma: f64, spec: MeshSpec) -> Result<Arc<Self>> {
        if !(spec.height_factor >= 4.0) {
            return Err(Error::invalid(
                "height_factor",
                format!(
                    "truncation height must be at least 4 / min |xi| (got factor {})",
                    spec.height_factor
                ),
            ));
        }
        let y_max = spec.height_factor / base.min_frequency();
        if spec.levels < 2 {
            return Err(Error::invalid("levels", "need at least 2 intervals in y"));
        }
        if !(spec.beta >= 1.0) {
            return Err(Error::invalid(
                "beta",
                format!("grading must be >= 1 (got {})", spec.beta),
            ));
        }
        let j = spec.levels as f64;
        let y = (0..=spec.levels)
            .map(|i| y_max * (i as f64 / j).powf(spec.beta))
            .collect();
        Self::from_nodes(base, gamma, y, spec.beta)
    }

    /// Mesh from explicit nodes; `y[0]` must be 0 and the nodes strictly increasing.
    pub fn from_nodes(base: &Grid, gamma: f64, y: Vec<f64>, beta: f64) -> Result<Arc<Self>> {
        validate_gamma(gamma)?;
        if y.len() < 3 {
            return Err(Error::invalid("y_nodes", "need at least 3 nodes"));
        }
        if y[0] != 0.0 {
            return Err(Error::invalid("y_nodes", "first node must be 0"));
        }
        if !y.windows(2).all(|w| w[1] > w[0]) || !y.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid(
                "y_nodes",
                "nodes must be finite and strictly increasing",
            ));
        }
        let a = 1.0 - 2.0 * gamma;
        let last = y.len() - 1;
        let mid: Vec<f64> = y.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let cell_weight = (0..=last)
            .map(|j| {
                let lo = if j == 0 { 0.0 } else { mid[j - 1] };
                let hi = if j == last { y[last] } else { mid[j] };
                power_integral(lo, hi, a)
            })
            .collect();
        let face_coeff = y
            .windows(2)
            .map(|w| 1.0 / power_integral(w[0], w[1], -a))
            .collect();

        let neighbors = (0..base.len())
            .map(|flat| {
                let idx = base.multi_index(flat);
                let n = base.points_per_axis();
                (0..base.dim())
                    .map(|axis| {
                        let mut up = idx;
                        let mut down = idx;
                        up[axis] = (idx[axis] + 1) % n;
                        down[axis] = (idx[axis] + n - 1) % n;
                        (
                            base.flat_index(&up[..base.dim()]),
                            base.flat_index(&down[..base.dim()]),
                        )
                    })
                    .collect()
            })
            .collect();

        Ok(Arc::new(ExtensionMesh {
            base: base.clone(),
            gamma,
            a,
            beta,
            y,
            cell_weight,
            face_coeff,
            neighbors,
        }))
    }

    pub fn base(&self) -> &Grid {
        &self.base
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Weight exponent `a = 1 - 2 gamma`.
    pub fn weight_exponent(&self) -> f64 {
        self.a
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn y_nodes(&self) -> &[f64] {
        &self.y
    }

    pub fn y_max(&self) -> f64 {
        *self.y.last().unwrap()
    }

    /// Number of intervals in `y`.
    pub fn levels(&self) -> usize {
        self.y.len() - 1
    }

    fn inv_h2(&self) -> f64 {
        1.0 / (self.base.spacing() * self.base.spacing())
    }

    /// Periodic difference Laplacian `-Delta_h` of one level.
    fn level_laplacian(&self, src: &[f64], dst: &mut [f64]) {
        let s = self.inv_h2();
        for (i, nb) in self.neighbors.iter().enumerate() {
            let mut acc = 0.0;
            for &(up, down) in nb {
                acc += 2.0 * src[i] - src[up] - src[down];
            }
            dst[i] = s * acc;
        }
    }

    /// Eigenvalue of `-Delta_h` for a flat spectral index.
    fn laplacian_eigenvalue(&self, flat: usize) -> f64 {
        let n = self.base.points_per_axis() as f64;
        let idx = self.base.multi_index(flat);
        let s = self.inv_h2();
        (0..self.base.dim())
            .map(|axis| {
                let sn = (PI * idx[axis] as f64 / n).sin();
                4.0 * s * sn * sn
            })
            .sum()
    }

    /// Interior operator on levels `1..=J`, `Dirichlet` data at level 0 removed.
    fn apply_interior(&self, u: &[f64], out: &mut [f64]) {
        let m = self.base.len();
        let levels = self.levels();
        let mut lap = vec![0.0; m];
        for j in 1..=levels {
            let row = &u[(j - 1) * m..j * m];
            self.level_laplacian(row, &mut lap);
            let below = self.face_coeff[j - 1];
            let above = if j < levels { self.face_coeff[j] } else { 0.0 };
            let v = self.cell_weight[j];
            for i in 0..m {
                let mut acc = (below + above) * row[i] + v * lap[i];
                if j > 1 {
                    acc -= below * u[(j - 2) * m + i];
                }
                if j < levels {
                    acc -= above * u[j * m + i];
                }
                out[(j - 1) * m + i] = acc;
            }
        }
    }

    /// Exact inverse of the interior operator: Fourier in the base, tridiagonal
    /// in `y`.
    fn separable_solve(&self, rhs: &[f64], out: &mut [f64]) {
        let m = self.base.len();
        let levels = self.levels();
        let mut spec = vec![Complex64::default(); m * levels];
        for j in 0..levels {
            let slot = &mut spec[j * m..(j + 1) * m];
            for i in 0..m {
                slot[i] = Complex64::new(rhs[j * m + i], 0.0);
            }
            self.base.transform(slot, false);
        }
        let mut diag = vec![0.0; levels];
        let mut off = vec![0.0; levels - 1];
        let mut column = vec![Complex64::default(); levels];
        for s in 0..m {
            let lambda = self.laplacian_eigenvalue(s);
            for j in 1..=levels {
                let below = self.face_coeff[j - 1];
                let above = if j < levels { self.face_coeff[j] } else { 0.0 };
                diag[j - 1] = below + above + lambda * self.cell_weight[j];
                if j < levels {
                    off[j - 1] = -above;
                }
            }
            for j in 0..levels {
                column[j] = spec[j * m + s];
            }
            solve_tridiagonal(&diag, &off, &mut column);
            for j in 0..levels {
                spec[j * m + s] = column[j];
            }
        }
        let scale = 1.0 / m as f64;
        for j in 0..levels {
            let slot = &mut spec[j * m..(j + 1) * m];
            self.base.transform(slot, true);
            for i in 0..m {
                out[j * m + i] = slot[i].re * scale;
            }
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        let m = self.base.len();
        let levels = self.levels();
        let lap_diag = 2.0 * self.base.dim() as f64 * self.inv_h2();
        let mut d = vec![0.0; m * levels];
        for j in 1..=levels {
            let above = if j < levels { self.face_coeff[j] } else { 0.0 };
            let v = self.face_coeff[j - 1] + above + self.cell_weight[j] * lap_diag;
            d[(j - 1) * m..j * m].iter_mut().for_each(|x| *x = v);
        }
        d
    }
}

/// Discrete extension: values on `base x y_nodes`, level-major.
#[derive(Clone, Debug)]
pub struct ExtensionField {
    mesh: Arc<ExtensionMesh>,
    values: Vec<f64>,
}

impl ExtensionField {
    pub fn new(mesh: &Arc<ExtensionMesh>, values: Vec<f64>) -> Result<Self> {
        let expected = mesh.base.len() * (mesh.levels() + 1);
        if values.len() != expected {
            return Err(Error::SizeMismatch {
                expected,
                actual: values.len(),
            });
        }
        Ok(ExtensionField {
            mesh: mesh.clone(),
            values,
        })
    }

    pub fn mesh(&self) -> &Arc<ExtensionMesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Values on level `j`.
    pub fn level(&self, j: usize) -> &[f64] {
        let m = self.mesh.base.len();
        &self.values[j * m..(j + 1) * m]
    }

    pub fn trace(&self) -> Field {
        Field::from_parts(self.mesh.base.clone(), self.level(0).to_vec())
    }

    /// Discrete weighted Dirichlet energy `int y^a |grad U|^2`.
    pub fn weighted_energy(&self) -> f64 {
        let mesh = &*self.mesh;
        let m = mesh.base.len();
        let h = mesh.base.spacing();
        let mut vertical = 0.0;
        for j in 0..mesh.levels() {
            let c = mesh.face_coeff[j];
            let lo = self.level(j);
            let hi = self.level(j + 1);
            vertical += c * lo.iter().zip(hi).map(|(a, b)| (b - a) * (b - a)).sum::<f64>();
        }
        let mut horizontal = 0.0;
        for j in 0..=mesh.levels() {
            let row = self.level(j);
            let mut s = 0.0;
            for i in 0..m {
                for &(up, _) in &mesh.neighbors[i] {
                    let d = (row[up] - row[i]) / h;
                    s += d * d;
                }
            }
            horizontal += mesh.cell_weight[j] * s;
        }
        (vertical + horizontal) * mesh.base.cell_volume()
    }

    /// CSV with columns `i0.., j, value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let base = &self.mesh.base;
        let cols: Vec<String> = (0..base.dim()).map(|a| format!("i{a}")).collect();
        writeln!(out, "{},j,value", cols.join(","))?;
        for j in 0..=self.mesh.levels() {
            for (i, v) in self.level(j).iter().enumerate() {
                let idx = base.multi_index(i);
                for k in &idx[..base.dim()] {
                    write!(out, "{k},")?;
                }
                writeln!(out, "{j},{v}")?;
            }
        }
        Ok(())
    }
}

/// Preconditioner for the conjugate-gradient extension solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Preconditioner {
    /// Fourier-tridiagonal inverse of the interior operator (exact on the torus).
    #[default]
    Separable,
    Jacobi,
}

#[derive(Clone, Copy, Debug)]
pub struct ExtensionSolverOptions {
    pub preconditioner: Preconditioner,
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for ExtensionSolverOptions {
    fn default() -> Self {
        ExtensionSolverOptions {
            preconditioner: Preconditioner::Separable,
            rel_tol: 1e-10,
            max_iter: 5000,
        }
    }
}

pub fn solve_extension(f: &Field, mesh: &Arc<ExtensionMesh>) -> Result<ExtensionField> {
    solve_extension_with(f, mesh, &ExtensionSolverOptions::default()).map(|(u, _)| u)
}

pub fn solve_extension_with(
    f: &Field,
    mesh: &Arc<ExtensionMesh>,
    opts: &ExtensionSolverOptions,
) -> Result<(ExtensionField, PcgOutcome)> {
    if *f.grid() != mesh.base {
        return Err(Error::GridMismatch);
    }
    let m = mesh.base.len();
    let levels = mesh.levels();
    let mut rhs = vec![0.0; m * levels];
    for (r, v) in rhs.iter_mut().zip(f.values()) {
        *r = mesh.face_coeff[0] * v;
    }
    // constants extend to constants
    let mut x: Vec<f64> = (0..levels).flat_map(|_| f.values().iter().copied()).collect();
    let apply = |u: &[f64], out: &mut [f64]| mesh.apply_interior(u, out);
    let outcome = match opts.preconditioner {
        Preconditioner::Separable => pcg(
            apply,
            |r: &[f64], z: &mut [f64]| mesh.separable_solve(r, z),
            &rhs,
            &mut x,
            opts.rel_tol,
            opts.max_iter,
        ),
        Preconditioner::Jacobi => {
            let d = mesh.diagonal();
            pcg(
                apply,
                |r: &[f64], z: &mut [f64]| {
                    for i in 0..r.len() {
                        z[i] = r[i] / d[i];
                    }
                },
                &rhs,
                &mut x,
                opts.rel_tol,
                opts.max_iter,
            )
        }
    };
    if !outcome.converged {
        return Err(Error::NonConvergence {
            iterations: outcome.iterations,
            residual: outcome.relative_residual,
        });
    }
    let mut values = Vec::with_capacity(m * (levels + 1));
    values.extend_from_slice(f.values());
    values.extend_from_slice(&x);
    Ok((
        ExtensionField {
            mesh: mesh.clone(),
            values,
        },
        outcome,
    ))
}

/// How the weighted normal derivative at `y = 0` is extracted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum FluxScheme {
    /// First-interval flux corrected by the flux balance of the boundary cell.
    /// This is the exact Schur complement of the discrete system.
    #[default]
    Balanced,
    /// `(U_1 - U_0) / int_0^{y_1} s^{-a}`.
    OneSided,
    /// One-sided estimates on `(0, y_1)` and `(0, y_2)` extrapolated in
    /// `y^{1+a}` to cancel the leading error.
    Richardson,
}

/// `-d* lim y^a dU/dy + q_c U(., 0)`, approximating `P f` for the trace `f`.
pub fn dtn_flux(u: &ExtensionField, q_c: f64) -> Result<Field> {
    dtn_flux_with(u, q_c, FluxScheme::Balanced)
}

pub fn dtn_flux_with(u: &ExtensionField, q_c: f64, scheme: FluxScheme) -> Result<Field> {
    let mesh = &*u.mesh;
    let a = mesh.a;
    let y1 = mesh.y[1];
    let y2 = mesh.y[2];
    let i1 = power_integral(0.0, y1, -a);
    if !(y1 > 0.0 && i1 > 0.0 && i1.is_finite() && mesh.cell_weight[0] > 0.0) {
        return Err(Error::MeshTooCoarse(format!(
            "first-level weight integral underflows (y_1 = {y1:e})"
        )));
    }
    let ds = d_star(mesh.gamma)?;
    let f = u.level(0);
    let u1 = u.level(1);
    let m = f.len();
    let flux: Vec<f64> = match scheme {
        FluxScheme::OneSided => (0..m).map(|i| (u1[i] - f[i]) / i1).collect(),
        FluxScheme::Balanced => {
            let mut lap = vec![0.0; m];
            mesh.level_laplacian(f, &mut lap);
            (0..m)
                .map(|i| mesh.face_coeff[0] * (u1[i] - f[i]) - mesh.cell_weight[0] * lap[i])
                .collect()
        }
        FluxScheme::Richardson => {
            let i2 = power_integral(0.0, y2, -a);
            let u2 = u.level(2);
            let p1 = y1.powf(1.0 + a);
            let p2 = y2.powf(1.0 + a);
            (0..m)
                .map(|i| {
                    let e1 = (u1[i] - f[i]) / i1;
                    let e2 = (u2[i] - f[i]) / i2;
                    (e1 * p2 - e2 * p1) / (p2 - p1)
                })
                .collect()
        }
    };
    let values = (0..m).map(|i| -ds * flux[i] + q_c * f[i]).collect();
    Ok(Field::from_parts(mesh.base.clone(), values))
}

/// `dtn_flux(solve_extension(f))`.
pub fn extension_operator(f: &Field, mesh: &Arc<ExtensionMesh>, q_c: f64) -> Result<Field> {
    dtn_flux(&solve_extension(f, mesh)?, q_c)
}

/// One row of a convergence study.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ConvergenceRecord {
    pub gamma: f64,
    pub mode: usize,
    pub mesh_size: usize,
    pub relative_error: f64,
}

/// Relative max-norm error of the extension operator on `cos(k x_0)` against
/// the multiplier `|xi|^{2 gamma}`.
pub fn mode_error(mesh: &Arc<ExtensionMesh>, mode: usize) -> Result<ConvergenceRecord> {
    let base = &mesh.base;
    let xi = mode as f64 * base.min_frequency();
    let f = Field::from_fn(base, |x| (xi * x[0]).cos());
    let out = extension_operator(&f, mesh, 0.0)?;
    let mult = xi.powf(2.0 * mesh.gamma);
    let err = out
        .values()
        .iter()
        .zip(f.values())
        .map(|(o, v)| (o - mult * v).abs())
        .fold(0.0, f64::max);
    Ok(ConvergenceRecord {
        gamma: mesh.gamma,
        mode,
        mesh_size: mesh.levels(),
        relative_error: err / mult,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mesh(n: usize, gamma: f64, levels: usize) -> Arc<ExtensionMesh> {
        let base = Grid::periodic(1, n).unwrap();
        ExtensionMesh::new(
            &base,
            gamma,
            MeshSpec {
                levels,
                ..MeshSpec::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn d_star_half_is_one() {
        assert!((d_star(0.5).unwrap() - 1.0).abs() < 1e-13);
        assert!(d_star(1.0).is_err());
        assert!(d_star(-0.1).is_err());
    }

    #[test]
    fn mesh_invariants() {
        let m = mesh(16, 0.3, 32);
        assert_eq!(m.y_nodes()[0], 0.0);
        assert!(m.y_nodes().windows(2).all(|w| w[1] > w[0]));
        assert!((m.weight_exponent() - 0.4).abs() < 1e-15);
        assert!((m.y_max() - 6.0).abs() < 1e-12);
        let total: f64 = m.cell_weight.iter().sum();
        assert!((total - power_integral(0.0, m.y_max(), m.a)).abs() < 1e-12 * total);
    }

    #[test]
    fn mesh_validation() {
        let base = Grid::periodic(1, 16).unwrap();
        let short = MeshSpec {
            height_factor: 2.0,
            ..MeshSpec::default()
        };
        assert!(ExtensionMesh::new(&base, 0.5, short).is_err());
        assert!(ExtensionMesh::from_nodes(&base, 0.5, vec![0.0, 1.0, 1.0, 2.0], 1.0).is_err());
        assert!(ExtensionMesh::from_nodes(&base, 0.5, vec![0.1, 1.0, 2.0], 1.0).is_err());
        assert!(ExtensionMesh::new(&base, 1.5, MeshSpec::default()).is_err());
    }

    #[test]
    fn zero_and_constant_data() {
        let m = mesh(16, 0.3, 32);
        let zero = solve_extension(&Field::zeros(m.base()), &m).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));
        let c = solve_extension(&Field::constant(m.base(), 2.5), &m).unwrap();
        assert!(c.values().iter().all(|v| (v - 2.5).abs() < 1e-12));
        let flux = dtn_flux(&c, 0.0).unwrap();
        assert!(flux.values().iter().all(|v| v.abs() < 1e-10));
        let flux = dtn_flux(&c, 0.4).unwrap();
        assert!(flux.values().iter().all(|v| (v - 1.0).abs() < 1e-10));
    }

    #[test]
    fn harmonic_extension_of_cosine() {
        let m = mesh(64, 0.5, 256);
        let f = Field::from_fn(m.base(), |x| x[0].cos());
        let u = solve_extension(&f, &m).unwrap();
        let base = m.base();
        let mut worst: f64 = 0.0;
        for (j, &y) in m.y_nodes().iter().enumerate().filter(|(_, &y)| y < 3.0) {
            for i in 0..base.len() {
                let x = base.coords(i)[0];
                let exact = x.cos() * (-y).exp();
                worst = worst.max((u.level(j)[i] - exact).abs());
            }
        }
        assert!(worst < 5e-3, "max deviation {worst}");
        let p = dtn_flux(&u, 0.0).unwrap();
        let err = p
            .values()
            .iter()
            .zip(f.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 0.01, "dtn error {err}");
    }

    #[test]
    fn preconditioners_agree() {
        let m = mesh(32, 0.35, 48);
        let f = Field::from_fn(m.base(), |x| 1.0 + x[0].sin() + 0.3 * (4.0 * x[0]).cos());
        let sep = ExtensionSolverOptions::default();
        let jac = ExtensionSolverOptions {
            preconditioner: Preconditioner::Jacobi,
            ..sep
        };
        let (a, out_a) = solve_extension_with(&f, &m, &sep).unwrap();
        let (b, out_b) = solve_extension_with(&f, &m, &jac).unwrap();
        assert!(out_a.iterations <= 2, "{out_a:?}");
        assert!(out_b.iterations > out_a.iterations);
        let diff = a
            .values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-7, "{diff}");
    }

    #[test]
    fn flux_schemes_are_consistent() {
        let m = mesh(64, 0.3, 512);
        let f = Field::from_fn(m.base(), |x| (2.0 * x[0]).cos());
        let u = solve_extension(&f, &m).unwrap();
        let exact = 2f64.powf(0.6);
        for scheme in [FluxScheme::Balanced, FluxScheme::OneSided, FluxScheme::Richardson] {
            let p = dtn_flux_with(&u, 0.0, scheme).unwrap();
            let rel = (p.values()[0] - exact).abs() / exact;
            assert!(rel < 0.02, "{scheme:?}: {rel}");
        }
    }

    #[test]
    fn csv_export_shape() {
        let m = mesh(4, 0.5, 2);
        let u = solve_extension(&Field::constant(m.base(), 1.0), &m).unwrap();
        let mut buf = Vec::new();
        u.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "i0,j,value");
        assert_eq!(lines.len(), 1 + 4 * 3);
        assert!(lines[5].starts_with("0,1,"));
    }
}
