//! The implicit step: given a nonnegative density `g`, find the conformal
//! factor `w >= 0` with
//!
//! ```text
//! h P w + w^N = g,        N = n_gamma,
//! ```
//!
//! as the minimizer of the strictly convex functional
//!
//! ```text
//! J(w) = h/2 <w, P w> + 1/(N+1) int w_+^(N+1) - int w g.
//! ```
//!
//! The minimizer is found by damped Newton with a Fourier-diagonal
//! preconditioner for the inner conjugate-gradient solves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::linalg::{dot, pcg};
use crate::params::FlowParams;
use crate::spectral::{apply_symbol, conformal_operator, fractional_symbol};

/// Right-hand side and parameters of one implicit step. The step size is
/// `params.h()`.
#[derive(Clone, Debug)]
pub struct ResolventProblem {
    g: Field,
    params: FlowParams,
}

impl ResolventProblem {
    pub fn new(g: Field, params: FlowParams) -> Result<Self> {
        params.validate()?;
        check_nonnegative(&g)?;
        Ok(ResolventProblem { g, params })
    }

    pub fn g(&self) -> &Field {
        &self.g
    }

    pub fn params(&self) -> &FlowParams {
        &self.params
    }

    pub fn h(&self) -> f64 {
        self.params.h()
    }
}

pub(crate) fn check_nonnegative(f: &Field) -> Result<()> {
    for (index, &value) in f.values().iter().enumerate() {
        if !(value >= 0.0) {
            return Err(Error::NegativeData { index, value });
        }
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct ResolventSolution {
    /// Conformal factor; the new density is `w^N`.
    pub w: Field,
    /// `|h P w + w^N - g|_2`.
    pub residual_norm: f64,
    /// `residual_norm / |g|_2`, zero when `g` vanishes.
    pub relative_residual: f64,
    pub iterations: usize,
    pub objective: f64,
}

impl ResolventSolution {
    pub fn density(&self, n_gamma: f64) -> Field {
        self.w.map(|v| v.powf(n_gamma))
    }
}

/// One line of the solver log.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    pub residual: f64,
    pub step_length: f64,
}

#[derive(Clone, Debug, Default)]
pub struct ResolventOptions {
    /// Initial iterate; defaults to `g^(1/N)`.
    pub initial: Option<Field>,
}

/// `J(w)` for the problem.
pub fn objective_j(w: &Field, prob: &ResolventProblem) -> Result<f64> {
    let pw = conformal_operator(w, &prob.params)?;
    objective_from_parts(w, &pw, prob)
}

fn objective_from_parts(w: &Field, pw: &Field, prob: &ResolventProblem) -> Result<f64> {
    let n = prob.params.n_gamma();
    let h = prob.h();
    let cell = w.grid().cell_volume();
    let quad = w.inner(pw)?;
    let mut power = 0.0;
    let mut linear = 0.0;
    for (&wi, &gi) in w.values().iter().zip(prob.g.values()) {
        power += wi.max(0.0).powf(n + 1.0);
        linear += wi * gi;
    }
    Ok(0.5 * h * quad + (power / (n + 1.0) - linear) * cell)
}

/// `h P w + w_+^N - g`, the L2 gradient of `J`.
pub fn objective_gradient(w: &Field, prob: &ResolventProblem) -> Result<Field> {
    let pw = conformal_operator(w, &prob.params)?;
    Ok(residual_from_parts(w, &pw, prob))
}

fn residual_from_parts(w: &Field, pw: &Field, prob: &ResolventProblem) -> Field {
    let n = prob.params.n_gamma();
    let h = prob.h();
    let values = w
        .values()
        .iter()
        .zip(pw.values())
        .zip(prob.g.values())
        .map(|((&wi, &pi), &gi)| h * pi + wi.max(0.0).powf(n) - gi)
        .collect();
    Field::from_parts(w.grid().clone(), values)
}

/// Which root the scalar equation `c w + w^N = g` selects when several exist.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RootPolicy {
    /// Keep the initial iterate `g^(1/N)` when it already solves the equation,
    /// otherwise take the largest root. From `g = 0` this stays at `w = 0`.
    #[default]
    Continuation,
    /// Always the largest nonnegative root.
    Largest,
}

/// Nonnegative root of `linear * w + w^n = g` for `g >= 0`, `n > 1`.
///
/// For `linear >= 0` the root is unique. For `linear < 0` and `g = 0` both
/// `0` and `(-linear)^(1/(n-1))` are roots and `policy` decides.
pub fn scalar_resolvent_root(linear: f64, n: f64, g: f64, policy: RootPolicy) -> f64 {
    debug_assert!(g >= 0.0 && n > 1.0);
    let f = |w: f64| linear * w + w.powf(n) - g;
    let start = g.powf(1.0 / n);
    if policy == RootPolicy::Continuation && f(start) == 0.0 {
        return start;
    }

    // bracket [lo, hi] with f(lo) <= 0 <= f(hi) on the increasing branch
    let mut lo = if linear >= 0.0 {
        0.0
    } else {
        (-linear / n).powf(1.0 / (n - 1.0))
    };
    let mut hi = if linear >= 0.0 {
        start
    } else {
        start.max((-linear).powf(1.0 / (n - 1.0))).max(lo)
    };
    while f(hi) < 0.0 {
        hi = 2.0 * hi + 1.0;
    }
    if f(hi) == 0.0 {
        return hi;
    }
    let mut w = hi;
    for _ in 0..200 {
        let fw = f(w);
        if fw == 0.0 {
            return w;
        }
        if fw > 0.0 {
            hi = w;
        } else {
            lo = w;
        }
        let df = linear + n * w.powf(n - 1.0);
        let mut next = w - fw / df;
        if !(df > 0.0) || !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if next == w || hi - lo <= 4.0 * f64::EPSILON * hi {
            return next;
        }
        w = next;
    }
    w
}

pub fn solve_resolvent(prob: &ResolventProblem) -> Result<ResolventSolution> {
    solve_resolvent_with(prob, &ResolventOptions::default(), |_| {})
}

/// Solver with an explicit initial iterate and a per-iteration observer.
pub fn solve_resolvent_with(
    prob: &ResolventProblem,
    opts: &ResolventOptions,
    mut observe: impl FnMut(&IterationRecord),
) -> Result<ResolventSolution> {
    let params = &prob.params;
    let grid = prob.g.grid().clone();
    let n = params.n_gamma();
    let h = prob.h();
    let q = params.q_c();
    let gamma = params.gamma();
    let tol = params.tol_resolvent();
    let g_norm = prob.g.l2_norm();

    if prob.g.values().iter().all(|&v| v == 0.0) {
        observe(&IterationRecord {
            iteration: 0,
            objective: 0.0,
            residual: 0.0,
            step_length: 0.0,
        });
        return Ok(ResolventSolution {
            w: Field::zeros(&grid),
            residual_norm: 0.0,
            relative_residual: 0.0,
            iterations: 0,
            objective: 0.0,
        });
    }

    if opts.initial.is_none() && prob.g.is_constant() {
        let root = scalar_resolvent_root(h * q, n, prob.g.values()[0], RootPolicy::Continuation);
        let w = Field::constant(&grid, root);
        return finish(prob, w, 0, g_norm, &mut observe);
    }

    let mut w = match &opts.initial {
        Some(w0) => {
            w0.check_same_grid(&prob.g)?;
            w0.clone()
        }
        None => prob.g.map(|v| v.powf(1.0 / n)),
    };
    let len = grid.len();
    let cell = grid.cell_volume();

    let mut pw = conformal_operator(&w, params)?;
    let mut r = residual_from_parts(&w, &pw, prob);
    let mut res = r.l2_norm();
    let mut obj = objective_from_parts(&w, &pw, prob)?;
    observe(&IterationRecord {
        iteration: 0,
        objective: obj,
        residual: res,
        step_length: 0.0,
    });

    let target = 1e-3 * tol * g_norm;
    let mut it = 0;
    while res > target && it < params.max_iter() {
        it += 1;
        let diag: Vec<f64> = w.values().iter().map(|&v| n * v.max(0.0).powf(n - 1.0)).collect();
        let shift = diag.iter().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let precond = |src: &[f64], dst: &mut [f64]| {
            let f = Field::from_parts(grid.clone(), src.to_vec());
            let out = apply_symbol(&f, |xi2| {
                1.0 / (h * fractional_symbol(xi2, gamma) + h * q + shift)
            });
            dst.copy_from_slice(out.values());
        };
        let hessian = |src: &[f64], dst: &mut [f64]| {
            let f = Field::from_parts(grid.clone(), src.to_vec());
            let pf = apply_symbol(&f, |xi2| fractional_symbol(xi2, gamma) + q);
            for i in 0..len {
                dst[i] = h * pf.values()[i] + diag[i] * src[i];
            }
        };

        let rel = res / g_norm;
        let inner_tol = rel.clamp(1e-14, 1e-4) * 1e-2;
        let rhs: Vec<f64> = r.values().iter().map(|v| -v).collect();
        let mut delta = vec![0.0; len];
        pcg(hessian, precond, &rhs, &mut delta, inner_tol, 1000);

        let mut slope = dot(r.values(), &delta) * cell;
        if !(slope < 0.0) {
            // Newton direction unusable; preconditioned steepest descent
            precond(&rhs, &mut delta);
            slope = dot(r.values(), &delta) * cell;
        }
        let dir = Field::from_parts(grid.clone(), delta);
        let pdir = conformal_operator(&dir, params)?;

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial = w.zip_map(&dir, |a, b| a + alpha * b)?;
            let ptrial = pw.zip_map(&pdir, |a, b| a + alpha * b)?;
            let obj_t = objective_from_parts(&trial, &ptrial, prob)?;
            let r_t = residual_from_parts(&trial, &ptrial, prob);
            let res_t = r_t.l2_norm();
            let armijo = obj_t <= obj + 1e-4 * alpha * slope;
            // at round-off level J no longer resolves the decrease
            let flat = (obj_t - obj).abs() <= 1e-13 * (1.0 + obj.abs()) && res_t < res;
            if armijo || flat {
                accepted = Some((trial, ptrial, r_t, res_t, obj_t));
                break;
            }
            alpha *= 0.5;
        }
        let Some((trial, ptrial, r_t, res_t, obj_t)) = accepted else {
            break;
        };
        let stalled = res_t > 0.5 * res;
        w = trial;
        pw = ptrial;
        r = r_t;
        obj = obj_t;
        res = res_t;
        observe(&IterationRecord {
            iteration: it,
            objective: obj,
            residual: res,
            step_length: alpha,
        });
        if stalled && res <= tol * g_norm {
            break;
        }
    }

    if !(res <= tol * g_norm) {
        return Err(Error::NonConvergence {
            iterations: it,
            residual: res / g_norm,
        });
    }
    project_nonnegative(&mut w)?;
    Ok(ResolventSolution {
        residual_norm: res,
        relative_residual: res / g_norm,
        iterations: it,
        objective: obj,
        w,
    })
}

fn finish(
    prob: &ResolventProblem,
    mut w: Field,
    iterations: usize,
    g_norm: f64,
    observe: &mut impl FnMut(&IterationRecord),
) -> Result<ResolventSolution> {
    project_nonnegative(&mut w)?;
    let pw = conformal_operator(&w, &prob.params)?;
    let res = residual_from_parts(&w, &pw, prob).l2_norm();
    let objective = objective_from_parts(&w, &pw, prob)?;
    observe(&IterationRecord {
        iteration: iterations,
        objective,
        residual: res,
        step_length: 0.0,
    });
    Ok(ResolventSolution {
        w,
        residual_norm: res,
        relative_residual: if g_norm > 0.0 { res / g_norm } else { 0.0 },
        iterations,
        objective,
    })
}

fn project_nonnegative(w: &mut Field) -> Result<()> {
    let floor = -1e-12 * w.sup().max(1.0);
    for (index, v) in w.values_mut().iter_mut().enumerate() {
        if *v < 0.0 {
            if *v > floor {
                *v = 0.0;
            } else {
                return Err(Error::NegativeSolution { index, value: *v });
            }
        }
    }
    Ok(())
}

/// Both sides of the one-sided L1 estimate between two implicit steps.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ContractionReport {
    /// `h q_c int (w1 - w2)_+ + int (w1^N - w2^N)_+`
    pub lhs: f64,
    /// `int (g1 - g2)_+`
    pub rhs: f64,
}

impl ContractionReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.lhs <= self.rhs + tol
    }
}

pub fn check_t_contraction(g1: &Field, g2: &Field, params: &FlowParams) -> Result<ContractionReport> {
    g1.check_same_grid(g2)?;
    let s1 = solve_resolvent(&ResolventProblem::new(g1.clone(), *params)?)?;
    let s2 = solve_resolvent(&ResolventProblem::new(g2.clone(), *params)?)?;
    let n = params.n_gamma();
    let hq = params.h() * params.q_c();
    let lin = s1.w.zip_map(&s2.w, |a, b| (a - b).max(0.0))?.integral();
    let pow =
        s1.w.zip_map(&s2.w, |a, b| (a.powf(n) - b.powf(n)).max(0.0))?
            .integral();
    let rhs = g1.zip_map(g2, |a, b| (a - b).max(0.0))?.integral();
    Ok(ContractionReport {
        lhs: hq * lin + pow,
        rhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use std::f64::consts::PI;

    fn params(gamma: f64, n: usize, q: f64, h: f64) -> FlowParams {
        FlowParams::new(gamma, n)
            .unwrap()
            .with_curvature(q)
            .unwrap()
            .with_step(h)
            .unwrap()
    }

    #[test]
    fn objective_at_zero_and_constants() {
        let g = Grid::periodic(1, 32).unwrap();
        let p = params(0.5, 3, 0.0, 1.0);
        let prob = ResolventProblem::new(Field::zeros(&g), p).unwrap();
        assert_eq!(objective_j(&Field::zeros(&g), &prob).unwrap(), 0.0);

        let c: f64 = 1.7;
        let nn = p.n_gamma();
        let j = objective_j(&Field::constant(&g, c), &prob).unwrap();
        let expected = 2.0 * PI * c.powf(nn + 1.0) / (nn + 1.0);
        assert!((j - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn zero_data_short_circuits() {
        let g = Grid::periodic(1, 16).unwrap();
        let prob = ResolventProblem::new(Field::zeros(&g), params(0.5, 3, 1.0, 1.0)).unwrap();
        let sol = solve_resolvent(&prob).unwrap();
        assert_eq!(sol.iterations, 0);
        assert!(sol.w.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_data_scalar_root() {
        let g = Grid::periodic(1, 16).unwrap();
        // h q w + w^2 = 2 with h = q = 1 has root w = 1
        let prob = ResolventProblem::new(Field::constant(&g, 2.0), params(0.5, 3, 1.0, 1.0)).unwrap();
        let sol = solve_resolvent(&prob).unwrap();
        assert!(sol.w.values().iter().all(|v| (v - 1.0).abs() < 1e-14));

        // flat case: w = c^(1/N)
        let p = params(0.3, 2, 0.0, 0.7);
        let prob = ResolventProblem::new(Field::constant(&g, 3.0), p).unwrap();
        let sol = solve_resolvent(&prob).unwrap();
        let expected = 3f64.powf(p.m_gamma());
        assert!(sol.w.values().iter().all(|v| (v - expected).abs() < 1e-14));
    }

    #[test]
    fn rejects_negative_data() {
        let g = Grid::periodic(1, 8).unwrap();
        let mut f = Field::constant(&g, 1.0);
        f.values_mut()[3] = -0.1;
        assert!(matches!(
            ResolventProblem::new(f, params(0.5, 3, 0.0, 1.0)),
            Err(Error::NegativeData { index: 3, .. })
        ));
    }

    #[test]
    fn scalar_root_policies() {
        // unique root for nonnegative linear coefficient
        let w = scalar_resolvent_root(1.0, 2.0, 2.0, RootPolicy::Continuation);
        assert!((w - 1.0).abs() < 1e-15);
        let w = scalar_resolvent_root(0.3, 1.4, 0.0, RootPolicy::Largest);
        assert_eq!(w, 0.0);
        // negative coefficient from zero data: two roots
        let h = 0.01;
        assert_eq!(scalar_resolvent_root(-h, 2.0, 0.0, RootPolicy::Continuation), 0.0);
        let big = scalar_resolvent_root(-h, 2.0, 0.0, RootPolicy::Largest);
        assert!((big - h).abs() < 1e-15);
        // positive data, negative coefficient: root of w^2 - h w = g
        let g: f64 = 0.5;
        let w = scalar_resolvent_root(-h, 2.0, g, RootPolicy::Continuation);
        let exact = 0.5 * (h + (h * h + 4.0 * g).sqrt());
        assert!((w - exact).abs() < 1e-14);
    }

    #[test]
    fn residual_meets_tolerance_on_smooth_data() {
        let g = Grid::periodic(1, 64).unwrap();
        let data = Field::from_fn(&g, |x| 1.0 + 0.8 * x[0].cos() + 0.1 * (5.0 * x[0]).sin());
        let p = params(0.7, 2, 0.4, 0.5);
        let prob = ResolventProblem::new(data.clone(), p).unwrap();
        let mut log = Vec::new();
        let sol = solve_resolvent_with(&prob, &ResolventOptions::default(), |r| log.push(*r)).unwrap();
        assert!(sol.relative_residual <= p.tol_resolvent());
        assert!(sol.w.inf() > 0.0);
        assert!(log.len() >= 2);
        assert!(log.windows(2).all(|w| w[1].objective <= w[0].objective + 1e-12));
        let grad = objective_gradient(&sol.w, &prob).unwrap();
        assert!(grad.l2_norm() <= p.tol_resolvent() * data.l2_norm());
    }

    #[test]
    fn contraction_equal_data() {
        let g = Grid::periodic(1, 32).unwrap();
        let data = Field::from_fn(&g, |x| 1.0 + 0.5 * x[0].sin());
        let rep = check_t_contraction(&data, &data, &params(0.5, 3, 1.0, 0.1)).unwrap();
        assert_eq!(rep.lhs, 0.0);
        assert_eq!(rep.rhs, 0.0);
    }

    #[test]
    fn contraction_shifted_data() {
        let g = Grid::periodic(1, 32).unwrap();
        let g2 = Field::from_fn(&g, |x| 1.0 + 0.5 * x[0].sin());
        let c = 0.3;
        let g1 = g2.map(|v| v + c);
        let rep = check_t_contraction(&g1, &g2, &params(0.4, 3, 1.0, 0.1)).unwrap();
        assert!((rep.rhs - c * 2.0 * PI).abs() < 1e-12);
        assert!(rep.lhs <= rep.rhs + 1e-12);
        assert!(rep.lhs > 0.0);
    }
}
