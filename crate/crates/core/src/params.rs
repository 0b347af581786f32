use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TOL_RESOLVENT: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 200;

/// Parameters shared by the resolvent and the flows.
///
/// `n` is the manifold dimension entering the exponents; it is independent of
/// the dimension of the computational grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowParams {
    gamma: f64,
    n: usize,
    q_c: f64,
    h: f64,
    tol_resolvent: f64,
    max_iter: usize,
}

impl FlowParams {
    pub fn new(gamma: f64, n: usize) -> Result<Self> {
        let p = FlowParams {
            gamma,
            n,
            q_c: 0.0,
            h: 1.0,
            tol_resolvent: DEFAULT_TOL_RESOLVENT,
            max_iter: DEFAULT_MAX_ITER,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_curvature(mut self, q_c: f64) -> Result<Self> {
        self.q_c = q_c;
        self.validate()?;
        Ok(self)
    }

    pub fn with_step(mut self, h: f64) -> Result<Self> {
        self.h = h;
        self.validate()?;
        Ok(self)
    }

    pub fn with_tolerance(mut self, tol: f64, max_iter: usize) -> Result<Self> {
        self.tol_resolvent = tol;
        self.max_iter = max_iter;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        validate_gamma(self.gamma)?;
        if self.n == 0 || (self.n as f64) <= 2.0 * self.gamma {
            return Err(Error::invalid(
                "n",
                format!(
                    "need n >= 1 and n > 2 gamma (n = {}, gamma = {})",
                    self.n, self.gamma
                ),
            ));
        }
        if !(self.q_c.is_finite() && self.q_c >= 0.0) {
            return Err(Error::invalid("q_c", format!("must be >= 0 (got {})", self.q_c)));
        }
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(Error::invalid("h", format!("must be positive (got {})", self.h)));
        }
        if !(self.tol_resolvent.is_finite() && self.tol_resolvent > 0.0) {
            return Err(Error::invalid(
                "tol_resolvent",
                format!("must be positive (got {})", self.tol_resolvent),
            ));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter", "must be at least 1"));
        }
        Ok(())
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q_c(&self) -> f64 {
        self.q_c
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn tol_resolvent(&self) -> f64 {
        self.tol_resolvent
    }

    pub fn max_iter(&self) -> usize {
        self.max_iter
    }

    /// Fast-diffusion exponent `(n + 2 gamma) / (n - 2 gamma)`.
    pub fn n_gamma(&self) -> f64 {
        let n = self.n as f64;
        (n + 2.0 * self.gamma) / (n - 2.0 * self.gamma)
    }

    /// `1 / n_gamma`.
    pub fn m_gamma(&self) -> f64 {
        let n = self.n as f64;
        (n - 2.0 * self.gamma) / (n + 2.0 * self.gamma)
    }

    /// Weight exponent `1 - 2 gamma` of the extension problem.
    pub fn weight_exponent(&self) -> f64 {
        1.0 - 2.0 * self.gamma
    }
}

pub(crate) fn validate_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::invalid(
            "gamma",
            format!("gamma must lie in (0,1) (got {gamma})"),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponents() {
        let p = FlowParams::new(0.5, 3).unwrap();
        assert_eq!(p.n_gamma(), 2.0);
        assert_eq!(p.m_gamma(), 0.5);
        for (g, n) in [(0.3, 1), (0.7, 2), (0.99, 3), (0.1, 5)] {
            let p = FlowParams::new(g, n).unwrap();
            assert!(p.n_gamma() > 1.0);
            assert!(p.m_gamma() > 0.0 && p.m_gamma() < 1.0);
            assert!((p.n_gamma() * p.m_gamma() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_values() {
        assert!(FlowParams::new(1.2, 3).is_err());
        assert!(FlowParams::new(0.0, 3).is_err());
        assert!(FlowParams::new(0.6, 1).is_err());
        let p = FlowParams::new(0.5, 3).unwrap();
        assert!(p.with_curvature(-1.0).is_err());
        assert!(p.with_step(0.0).is_err());
        assert!(p.with_tolerance(0.0, 10).is_err());
    }

    #[test]
    fn gamma_message() {
        let err = FlowParams::new(1.2, 3).unwrap_err().to_string();
        assert!(err.contains("gamma must lie in (0,1)"), "{err}");
    }
}
