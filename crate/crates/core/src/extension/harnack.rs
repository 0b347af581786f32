//! Harnack quotients of positive weighted-harmonic functions on a box.
//!
//! The box `[-4R, 4R] x [0, 4R]` carries Dirichlet data on its left, top and
//! right sides and zero weighted flux on `y = 0`, so the discrete solution is
//! the even reflection of a positive solution of `div(|y|^a grad U) = 0` on
//! `[-4R, 4R]^2`. The quotient `sup / inf` is taken over the nodes of the half
//! ball `|(x, y)| <= R`. Running the same normalized boundary data at radius
//! `R` and `R / 2` with a fixed mesh spacing checks that the quotient does not
//! depend on the scale.

use std::f64::consts::PI;

use rand::Rng;
use serde::Serialize;

use super::power_integral;
use crate::error::{Error, Result};
use crate::linalg::pcg;
use crate::params::validate_gamma;
use crate::rng::check_rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryData {
    /// Random smooth positive data.
    Random,
    /// Random data forced to vanish at the top-left corner.
    VanishingCorner,
    /// Constant data 1.
    Constant,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct HarnackExperiment {
    pub gamma: f64,
    pub radius: f64,
    /// Mesh cells per radius at the larger scale; the half scale keeps the
    /// same physical spacing.
    pub cells_per_radius: usize,
    pub trials: usize,
    pub seed: u64,
    pub data: BoundaryData,
}

impl Default for HarnackExperiment {
    fn default() -> Self {
        HarnackExperiment {
            gamma: 0.5,
            radius: 1.0,
            cells_per_radius: 16,
            trials: 50,
            seed: 0,
            data: BoundaryData::Random,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScaleResult {
    pub radius: f64,
    /// Quotient of every trial, in trial order.
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct HarnackReport {
    pub gamma: f64,
    pub scales: Vec<ScaleResult>,
    /// `max(max_ratio) / min(max_ratio)` across scales.
    pub scale_spread: f64,
}

const CHECK_ID: u64 = 0x4841_524e; // "HARN"

pub fn check_harnack_fks(exp: &HarnackExperiment) -> Result<HarnackReport> {
    validate_gamma(exp.gamma)?;
    if exp.cells_per_radius < 4 || !exp.cells_per_radius.is_multiple_of(2) {
        return Err(Error::invalid(
            "cells_per_radius",
            "must be an even number >= 4 so the half scale is resolved",
        ));
    }
    if !(exp.radius > 0.0) {
        return Err(Error::invalid("radius", "must be positive"));
    }
    let spacing = exp.radius / exp.cells_per_radius as f64;
    let mut scales = Vec::new();
    for (radius, cells) in [
        (exp.radius, exp.cells_per_radius),
        (0.5 * exp.radius, exp.cells_per_radius / 2),
    ] {
        let problem = BoxProblem::new(exp.gamma, radius, cells, spacing);
        let mut ratios = Vec::with_capacity(exp.trials);
        for trial in 0..exp.trials {
            let coeffs = random_coefficients(exp.seed, trial as u64);
            let data = |s: f64| boundary_value(exp.data, &coeffs, s);
            let u = problem.solve(data)?;
            ratios.push(problem.half_ball_ratio(&u));
        }
        let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
        scales.push(ScaleResult {
            radius,
            ratios,
            max_ratio,
        });
    }
    let hi = scales.iter().map(|s| s.max_ratio).fold(0.0, f64::max);
    let lo = scales.iter().map(|s| s.max_ratio).fold(f64::INFINITY, f64::min);
    Ok(HarnackReport {
        gamma: exp.gamma,
        scales,
        scale_spread: hi / lo,
    })
}

fn random_coefficients(seed: u64, trial: u64) -> Vec<(f64, f64)> {
    let mut rng = check_rng(seed, CHECK_ID.wrapping_add(trial << 20));
    (0..4)
        .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

/// Positive data as a function of normalized arc length `s` in `[0, 1]`
/// (left side upward, top, right side downward).
fn boundary_value(kind: BoundaryData, coeffs: &[(f64, f64)], s: f64) -> f64 {
    let random = || {
        let e: f64 = coeffs
            .iter()
            .enumerate()
            .map(|(m, (a, b))| {
                let k = 2.0 * PI * (m + 1) as f64;
                (a * (k * s).cos() + b * (k * s).sin()) / (m + 1) as f64
            })
            .sum();
        e.exp()
    };
    match kind {
        BoundaryData::Constant => 1.0,
        BoundaryData::Random => random(),
        BoundaryData::VanishingCorner => {
            // top-left corner sits at s = 1/4
            let d = (4.0 * (s - 0.25).abs()).min(1.0);
            d * random()
        }
    }
}

struct BoxProblem {
    radius: f64,
    nx: usize,
    ny: usize,
    dx: f64,
    /// x-coupling `V_j / dx` per level
    x_coeff: Vec<f64>,
    /// y-coupling `dx / int s^{-a}` per face `j..j+1`
    y_coeff: Vec<f64>,
}

impl BoxProblem {
    fn new(gamma: f64, radius: f64, cells_per_radius: usize, spacing: f64) -> Self {
        let a = 1.0 - 2.0 * gamma;
        let nx = 8 * cells_per_radius;
        let ny = 4 * cells_per_radius;
        let dx = spacing;
        let y: Vec<f64> = (0..=ny).map(|j| j as f64 * spacing).collect();
        let x_coeff = (0..=ny)
            .map(|j| {
                let lo = if j == 0 { 0.0 } else { y[j] - 0.5 * spacing };
                let hi = if j == ny { y[j] } else { y[j] + 0.5 * spacing };
                power_integral(lo, hi, a) / dx
            })
            .collect();
        let y_coeff = y
            .windows(2)
            .map(|w| dx / power_integral(w[0], w[1], -a))
            .collect();
        BoxProblem {
            radius,
            nx,
            ny,
            dx,
            x_coeff,
            y_coeff,
        }
    }

    fn x_of(&self, i: usize) -> f64 {
        -4.0 * self.radius + i as f64 * self.dx
    }

    fn y_of(&self, j: usize) -> f64 {
        j as f64 * self.dx
    }

    /// Full nodal array `(nx + 1) x (ny + 1)`, row `j` major.
    fn solve(&self, data: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
        let (nx, ny) = (self.nx, self.ny);
        let width = nx + 1;
        let perimeter = 16.0 * self.radius;
        let side = 4.0 * self.radius;
        let mut full = vec![0.0; width * (ny + 1)];
        for j in 0..=ny {
            let y = self.y_of(j);
            full[j * width] = data(y / perimeter);
            full[j * width + nx] = data((4.0 * side - y) / perimeter);
        }
        for i in 0..=nx {
            let x = self.x_of(i) + 4.0 * self.radius;
            full[ny * width + i] = data((side + x) / perimeter);
        }

        // unknowns: i in 1..nx, j in 0..ny
        let ni = nx - 1;
        let count = ni * ny;
        let at = |i: usize, j: usize| j * ni + (i - 1);
        let apply = |u: &[f64], out: &mut [f64]| {
            for j in 0..ny {
                for i in 1..nx {
                    let k = at(i, j);
                    let cx = self.x_coeff[j];
                    let mut acc = 2.0 * cx * u[k];
                    if i > 1 {
                        acc -= cx * u[at(i - 1, j)];
                    }
                    if i < nx - 1 {
                        acc -= cx * u[at(i + 1, j)];
                    }
                    let up = self.y_coeff[j];
                    acc += up * u[k];
                    if j + 1 < ny {
                        acc -= up * u[at(i, j + 1)];
                    }
                    if j > 0 {
                        let down = self.y_coeff[j - 1];
                        acc += down * (u[k] - u[at(i, j - 1)]);
                    }
                    out[k] = acc;
                }
            }
        };
        let mut rhs = vec![0.0; count];
        for j in 0..ny {
            let cx = self.x_coeff[j];
            rhs[at(1, j)] += cx * full[j * width];
            rhs[at(nx - 1, j)] += cx * full[j * width + nx];
            if j + 1 == ny {
                for i in 1..nx {
                    rhs[at(i, j)] += self.y_coeff[j] * full[ny * width + i];
                }
            }
        }
        let diag: Vec<f64> = (0..count)
            .map(|k| {
                let j = k / ni;
                let down = if j > 0 { self.y_coeff[j - 1] } else { 0.0 };
                2.0 * self.x_coeff[j] + self.y_coeff[j] + down
            })
            .collect();
        let mean = rhs.iter().sum::<f64>() / diag.iter().sum::<f64>();
        let mut x = vec![mean.max(0.0); count];
        let out = pcg(
            apply,
            |r: &[f64], z: &mut [f64]| {
                for k in 0..r.len() {
                    z[k] = r[k] / diag[k];
                }
            },
            &rhs,
            &mut x,
            1e-11,
            20 * count,
        );
        if !out.converged {
            return Err(Error::NonConvergence {
                iterations: out.iterations,
                residual: out.relative_residual,
            });
        }
        for j in 0..ny {
            for i in 1..nx {
                full[j * width + i] = x[at(i, j)];
            }
        }
        Ok(full)
    }

    fn half_ball_ratio(&self, full: &[f64]) -> f64 {
        let width = self.nx + 1;
        let r2 = self.radius * self.radius * (1.0 + 1e-12);
        let mut sup = f64::NEG_INFINITY;
        let mut inf = f64::INFINITY;
        for j in 0..=self.ny {
            for i in 0..=self.nx {
                let (x, y) = (self.x_of(i), self.y_of(j));
                if x * x + y * y <= r2 {
                    let v = full[j * width + i];
                    sup = sup.max(v);
                    inf = inf.min(v);
                }
            }
        }
        sup / inf
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_data_gives_unit_ratio() {
        let exp = HarnackExperiment {
            trials: 2,
            cells_per_radius: 8,
            data: BoundaryData::Constant,
            ..HarnackExperiment::default()
        };
        let rep = check_harnack_fks(&exp).unwrap();
        for s in &rep.scales {
            for r in &s.ratios {
                assert!((r - 1.0).abs() < 1e-8, "{r}");
            }
        }
    }

    #[test]
    fn vanishing_corner_stays_finite() {
        let exp = HarnackExperiment {
            trials: 5,
            cells_per_radius: 8,
            gamma: 0.3,
            data: BoundaryData::VanishingCorner,
            ..HarnackExperiment::default()
        };
        let rep = check_harnack_fks(&exp).unwrap();
        for s in &rep.scales {
            assert!(s.max_ratio.is_finite() && s.max_ratio >= 1.0);
        }
    }

    #[test]
    fn rejects_odd_resolution() {
        let exp = HarnackExperiment {
            cells_per_radius: 7,
            ..HarnackExperiment::default()
        };
        assert!(check_harnack_fks(&exp).is_err());
    }
}
