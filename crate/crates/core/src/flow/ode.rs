//! Space-free version of the flow: `d/dt U^N = -s U` for a constant `U`,
//! advanced by the same implicit step as the field solver.
//!
//! For `s = -1` (negative curvature) the equation is taken as
//! `d/dt U^N = +U`, whose solutions from `U(0) = 0` are not unique: `U = 0`
//! and `U = ((N-1)/N t)^(1/(N-1))` both qualify.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::resolvent::{scalar_resolvent_root, RootPolicy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OdeSign {
    /// `d/dt U^N = -U`: decay and extinction.
    Positive,
    /// `d/dt U^N = +U`.
    Negative,
}

impl OdeSign {
    pub fn from_int(sign: i64) -> Result<Self> {
        match sign {
            1 => Ok(OdeSign::Positive),
            -1 => Ok(OdeSign::Negative),
            _ => Err(Error::invalid("sign", format!("must be +1 or -1 (got {sign})"))),
        }
    }

    fn value(self) -> f64 {
        match self {
            OdeSign::Positive => 1.0,
            OdeSign::Negative => -1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OdeBranch {
    Trivial,
    Nontrivial,
}

#[derive(Clone, Debug, Serialize)]
pub struct OdeTrajectory {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// First time with `U^N < 1e-8 U0^N` (positive sign only).
    pub extinction: Option<f64>,
    /// Closest exact branch, for the negative sign from `U0 = 0`.
    pub branch: Option<OdeBranch>,
    /// Max deviation from `U = 0` and from the nontrivial branch.
    pub distance_trivial: f64,
    pub distance_nontrivial: f64,
}

/// `((N-1)/N t)^(1/(N-1))`.
pub fn nontrivial_branch(n: f64, t: f64) -> f64 {
    ((n - 1.0) / n * t).powf(1.0 / (n - 1.0))
}

/// Max over `times > 0` of `|d/dt U^N - U| / U` on the nontrivial branch, with
/// the derivative taken by complex-step differentiation.
pub fn nontrivial_branch_residual(n: f64, times: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for &t in times.iter().filter(|&&t| t > 0.0) {
        let dt = 1e-20 * t;
        let z = Complex64::new(t, dt) * ((n - 1.0) / n);
        let un = z.powf(n / (n - 1.0));
        let derivative = un.im / dt;
        let u = nontrivial_branch(n, t);
        worst = worst.max((derivative - u).abs() / u);
    }
    worst
}

pub fn ode_mode(
    n: f64,
    sign: OdeSign,
    u0: f64,
    h: f64,
    t_end: f64,
    policy: RootPolicy,
) -> Result<OdeTrajectory> {
    if !(n > 1.0) || !n.is_finite() {
        return Err(Error::invalid("N", format!("must exceed 1 (got {n})")));
    }
    if !(u0 >= 0.0) || !u0.is_finite() {
        return Err(Error::invalid("U0", format!("must be >= 0 (got {u0})")));
    }
    if !(h > 0.0) || !(t_end > 0.0) {
        return Err(Error::invalid("h", "step and horizon must be positive"));
    }
    let linear = h * sign.value();
    let threshold = 1e-8 * u0.powf(n);
    let mut times = vec![0.0];
    let mut values = vec![u0];
    let mut extinction = None;
    if sign == OdeSign::Positive && u0 == 0.0 {
        extinction = Some(0.0);
    }
    let steps = (t_end / h).round() as usize;
    let mut u = u0;
    for k in 1..=steps {
        if extinction.is_some() {
            break;
        }
        u = scalar_resolvent_root(linear, n, u.powf(n), policy);
        let t = k as f64 * h;
        times.push(t);
        values.push(u);
        if sign == OdeSign::Positive && u.powf(n) < threshold {
            extinction = Some(t);
        }
    }

    let distance_trivial = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let distance_nontrivial = times
        .iter()
        .zip(&values)
        .fold(0.0_f64, |m, (&t, &v)| m.max((v - nontrivial_branch(n, t)).abs()));
    let branch =
        (sign == OdeSign::Negative && u0 == 0.0).then_some(if distance_trivial <= distance_nontrivial {
            OdeBranch::Trivial
        } else {
            OdeBranch::Nontrivial
        });
    Ok(OdeTrajectory {
        times,
        values,
        extinction,
        branch,
        distance_trivial,
        distance_nontrivial,
    })
}
