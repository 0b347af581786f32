//! Pointwise conformal identities and inequality diagnostics.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::params::validate_gamma;
use crate::spectral::{fractional_laplacian, spectral_gradient};

/// Both sides of the Stroock-Varopoulos inequality
/// `int v^{q-1} (-Delta)^gamma v >= 4(q-1)/q^2 int |(-Delta)^{gamma/2} v^{q/2}|^2`.
///
/// Only the fractional part of `P` enters; the `q_c` shift adds
/// `q_c int v^q` to the left and the matching term is smaller by the factor
/// `4(q-1)/q^2 <= 1`, so it cannot break the inequality.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SvReport {
    pub lhs: f64,
    pub rhs: f64,
}

impl SvReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.lhs >= self.rhs - tol
    }
}

pub fn stroock_varopoulos_check(v: &Field, gamma: f64, q: f64) -> Result<SvReport> {
    validate_gamma(gamma)?;
    if !(q > 1.0) {
        return Err(Error::invalid("q", format!("need q > 1 (got {q})")));
    }
    check_positive(v)?;
    let lv = fractional_laplacian(v, gamma)?;
    let lhs = v.map(|x| x.powf(q - 1.0)).inner(&lv)?;
    let half = fractional_laplacian(&v.map(|x| x.powf(0.5 * q)), 0.5 * gamma)?;
    let rhs = 4.0 * (q - 1.0) / (q * q) * half.inner(&half)?;
    Ok(SvReport { lhs, rhs })
}

fn check_positive(v: &Field) -> Result<()> {
    for (index, &value) in v.values().iter().enumerate() {
        if !(value > 0.0) {
            return Err(Error::NonPositive { index, value });
        }
    }
    Ok(())
}

/// `sup w / inf w` for a positive field.
pub fn harnack_quotient(w: &Field) -> Result<f64> {
    check_positive(w)?;
    Ok(w.sup() / w.inf())
}

/// `sup |grad w| / w` with the gradient taken spectrally.
pub fn grad_quotient(w: &Field) -> Result<f64> {
    check_positive(w)?;
    let grad = spectral_gradient(w);
    let mut worst: f64 = 0.0;
    for i in 0..w.len() {
        let g2: f64 = grad.iter().map(|d| d.values()[i] * d.values()[i]).sum();
        worst = worst.max(g2.sqrt() / w.values()[i]);
    }
    Ok(worst)
}

/// Inverse stereographic projection `R^n -> S^n` from the north pole
/// `(0, ..., 0, 1)`; non-finite input maps to the pole.
pub fn stereographic_inverse(x: &[f64]) -> Vec<f64> {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    let mut out = Vec::with_capacity(x.len() + 1);
    if !r2.is_finite() {
        out.resize(x.len(), 0.0);
        out.push(1.0);
        return out;
    }
    let d = 1.0 + r2;
    out.extend(x.iter().map(|v| 2.0 * v / d));
    out.push((r2 - 1.0) / d);
    out
}

/// Stereographic projection `S^n \ {north pole} -> R^n`.
pub fn stereographic_projection(p: &[f64]) -> Vec<f64> {
    let (last, head) = p
        .split_last()
        .expect("point on S^n needs at least one coordinate");
    // 1 - last = |head|^2 / (1 + last) on the sphere; the second form keeps
    // precision near the pole
    let d = if *last > 0.0 {
        head.iter().map(|v| v * v).sum::<f64>() / (1.0 + last)
    } else {
        1.0 - last
    };
    head.iter().map(|v| v / d).collect()
}

/// Samples of a function at scattered points of `R^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloudField {
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl PointCloudField {
    pub fn new(points: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::SizeMismatch {
                expected: points.len(),
                actual: values.len(),
            });
        }
        Ok(PointCloudField { points, values })
    }

    pub fn from_fn(points: Vec<Vec<f64>>, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = points.iter().map(|p| f(p)).collect();
        PointCloudField { points, values }
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Kelvin transform `f -> |x|^{-(n - 2 gamma)} f(x / |x|^2)`.
///
/// Output points are the inversions `y = x / |x|^2` of the input points, and
/// the value at `y` is `|y|^{-(n - 2 gamma)} f(x)`.
pub fn kelvin_transform(f: &PointCloudField, n: usize, gamma: f64) -> Result<PointCloudField> {
    validate_gamma(gamma)?;
    let s = n as f64 - 2.0 * gamma;
    let mut points = Vec::with_capacity(f.points.len());
    let mut values = Vec::with_capacity(f.points.len());
    for (i, (p, &v)) in f.points.iter().zip(&f.values).enumerate() {
        let r2: f64 = p.iter().map(|c| c * c).sum();
        if r2 == 0.0 {
            return Err(Error::OriginInCloud(i));
        }
        let y: Vec<f64> = p.iter().map(|c| c / r2).collect();
        // |y| = 1/|x|, so |y|^{-s} = |x|^s
        values.push(r2.powf(0.5 * s) * v);
        points.push(y);
    }
    Ok(PointCloudField { points, values })
}

/// The bubble `(1 + |x|^2)^{-(n - 2 gamma)/2}`.
pub fn bubble(x: &[f64], n: usize, gamma: f64) -> f64 {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    (1.0 + r2).powf(-0.5 * (n as f64 - 2.0 * gamma))
}

/// One JSON line of a check report.
#[derive(Clone, Debug, Serialize)]
pub struct CheckRecord {
    pub check: String,
    pub parameters: serde_json::Value,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}
