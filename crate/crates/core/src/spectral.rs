//! Discrete Fourier analysis and the spectral conformal operator
//! `P = (-Delta)^gamma + q_c` on the flat torus.
//!
//! Transform convention: the forward transform is the plain sum
//! `F[k] = sum_j f[j] exp(-i xi_k . x_j)`, the inverse divides by the point
//! count. A constant field `c` therefore maps to `c * len` in the zero mode.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::params::{validate_gamma, FlowParams};

/// Complex spectrum of a real field.
#[derive(Clone, Debug)]
pub struct SpectralField {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(grid: &Grid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::SizeMismatch {
                expected: grid.len(),
                actual: coeffs.len(),
            });
        }
        Ok(SpectralField {
            grid: grid.clone(),
            coeffs,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }
}

pub fn dft_forward(f: &Field) -> SpectralField {
    let mut data: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    f.grid().transform(&mut data, false);
    SpectralField {
        grid: f.grid().clone(),
        coeffs: data,
    }
}

/// Inverse transform; the imaginary part is discarded.
pub fn dft_inverse(spec: &SpectralField) -> Field {
    let mut data = spec.coeffs.clone();
    spec.grid.transform(&mut data, true);
    let scale = 1.0 / data.len() as f64;
    let values = data.iter().map(|c| c.re * scale).collect();
    Field::from_parts(spec.grid.clone(), values)
}

/// Multiplies the spectrum by a real, even symbol given as a function of `|xi|^2`.
pub fn apply_symbol(f: &Field, symbol: impl Fn(f64) -> f64) -> Field {
    let mut spec = dft_forward(f);
    for (c, &xi2) in spec.coeffs.iter_mut().zip(f.grid().xi_squared()) {
        *c *= symbol(xi2);
    }
    dft_inverse(&spec)
}

/// `(-Delta)^gamma f`, the Fourier multiplier `|xi|^{2 gamma}`.
pub fn fractional_laplacian(f: &Field, gamma: f64) -> Result<Field> {
    validate_gamma(gamma)?;
    Ok(apply_symbol(f, |xi2| fractional_symbol(xi2, gamma)))
}

/// `|xi|^{2 gamma}` from `|xi|^2`, with the zero mode annihilated.
pub fn fractional_symbol(xi_sq: f64, gamma: f64) -> f64 {
    if xi_sq == 0.0 {
        0.0
    } else {
        xi_sq.powf(gamma)
    }
}

/// `P f = (-Delta)^gamma f + q_c f`. Applied to the constant 1 it returns the
/// model curvature `q_c`.
pub fn conformal_operator(f: &Field, params: &FlowParams) -> Result<Field> {
    let gamma = params.gamma();
    let q = params.q_c();
    validate_gamma(gamma)?;
    Ok(apply_symbol(f, |xi2| fractional_symbol(xi2, gamma) + q))
}

/// `integral(f P f)`, the quadratic form of the conformal operator.
pub fn dirichlet_energy(f: &Field, params: &FlowParams) -> Result<f64> {
    f.inner(&conformal_operator(f, params)?)
}

/// Spectral partial derivatives, one field per grid axis. The Nyquist mode is
/// dropped so the derivative of a real field stays real.
pub fn spectral_gradient(f: &Field) -> Vec<Field> {
    let grid = f.grid();
    let n = grid.points_per_axis();
    let base = grid.min_frequency();
    let spec = dft_forward(f);
    (0..grid.dim())
        .map(|axis| {
            let mut d = spec.clone();
            for (flat, c) in d.coeffs.iter_mut().enumerate() {
                let idx = grid.multi_index(flat)[axis];
                let k = if 2 * idx == n {
                    0.0
                } else {
                    crate::grid::signed_wavenumber(idx, n) as f64 * base
                };
                *c *= Complex64::new(0.0, k);
            }
            dft_inverse(&d)
        })
        .collect()
}
