//! Time evolution of the density `u` with `d/dt u = -P(u^m)`, `m = 1/N`,
//! equivalently `d/dt w^N = -P w` for the conformal factor `w = u^m`.
//!
//! Each step is one implicit (Crandall-Liggett) resolvent solve. The
//! volume-preserving flow is available directly ([`step_rescaled_direct`]) and
//! by rescaling an un-rescaled trace ([`rescale_via_time_change`]).

mod ode;
mod rescaled;

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::params::FlowParams;
use crate::resolvent::{check_nonnegative, solve_resolvent, ResolventProblem};
use crate::spectral::dirichlet_energy;

pub use ode::{nontrivial_branch, nontrivial_branch_residual, ode_mode, OdeBranch, OdeSign, OdeTrajectory};
pub use rescaled::{
    rescale_via_time_change, run_rescaled_direct, step_rescaled_direct, RescaleMap, RescaledStep,
    RescaledTrajectory,
};

/// Density at a time. The conformal factor is `density^(1/N)`.
#[derive(Clone, Debug)]
pub struct FlowState {
    t: f64,
    density: Field,
}

impl FlowState {
    pub fn new(t: f64, density: Field) -> Result<Self> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::invalid("t", format!("must be finite and >= 0 (got {t})")));
        }
        check_nonnegative(&density)?;
        Ok(FlowState { t, density })
    }

    /// State whose conformal factor is `w`.
    pub fn from_conformal_factor(t: f64, w: &Field, n_gamma: f64) -> Result<Self> {
        check_nonnegative(w)?;
        FlowState::new(t, w.map(|v| v.powf(n_gamma)))
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn density(&self) -> &Field {
        &self.density
    }

    pub fn into_density(self) -> Field {
        self.density
    }

    pub fn conformal_factor(&self, n_gamma: f64) -> Field {
        self.density.map(|v| v.powf(1.0 / n_gamma))
    }

    pub fn mass(&self) -> f64 {
        self.density.integral()
    }

    /// `int w^(N+1)` with `w` the conformal factor.
    pub fn volume(&self, n_gamma: f64) -> f64 {
        self.density.map(|v| v.powf((n_gamma + 1.0) / n_gamma)).integral()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceRecord {
    pub t: f64,
    pub mass: f64,
    pub volume: f64,
    pub sup: f64,
    pub inf: f64,
    pub harnack_quotient: f64,
    pub dirichlet_energy: f64,
}

impl TraceRecord {
    pub fn of(state: &FlowState, params: &FlowParams) -> Result<Self> {
        let n = params.n_gamma();
        let w = state.conformal_factor(n);
        Ok(TraceRecord {
            t: state.t,
            mass: state.mass(),
            volume: state.volume(n),
            sup: state.density.sup(),
            inf: state.density.inf(),
            harnack_quotient: w.sup() / w.inf(),
            dirichlet_energy: dirichlet_energy(&w, params)?,
        })
    }
}

pub const TRACE_HEADER: &str = "t,mass,volume,sup,inf,harnack_quotient,dirichlet_energy";

/// Per-step records of a run, with the states kept at the snapshot stride.
#[derive(Clone, Debug, Default)]
pub struct FlowTrace {
    pub records: Vec<TraceRecord>,
    /// Initial state, every `snapshot_stride`-th state and the final state.
    pub states: Vec<FlowState>,
    /// Time at which `sup(density)` fell below the extinction threshold.
    pub extinction: Option<f64>,
}

impl FlowTrace {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{TRACE_HEADER}")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.t, r.mass, r.volume, r.sup, r.inf, r.harnack_quotient, r.dirichlet_energy
            )?;
        }
        Ok(())
    }

    pub fn last_state(&self) -> Option<&FlowState> {
        self.states.last()
    }

    fn push_state(&mut self, state: &FlowState) {
        if self.states.last().map(|s| s.t) != Some(state.t) {
            self.states.push(state.clone());
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct RunOptions {
    pub h: f64,
    pub t_end: f64,
    /// Keep every `snapshot_stride`-th state; 0 keeps only the endpoints.
    pub snapshot_stride: usize,
    /// Extinction is declared once `sup(density) < extinction_ratio * sup(initial)`.
    pub extinction_ratio: f64,
    /// A step losing more than this fraction of the mass is retried with
    /// half the step size.
    pub max_mass_drop: f64,
    /// Smallest step the halving may reach.
    pub min_step: f64,
}

impl RunOptions {
    pub fn new(h: f64, t_end: f64) -> Self {
        RunOptions {
            h,
            t_end,
            snapshot_stride: 1,
            extinction_ratio: 1e-8,
            max_mass_drop: 0.2,
            min_step: h * 1e-6,
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.snapshot_stride = stride;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::invalid("h", format!("must be positive (got {})", self.h)));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(Error::invalid(
                "t_end",
                format!("must be positive (got {})", self.t_end),
            ));
        }
        if !(self.min_step > 0.0) || self.min_step > self.h {
            return Err(Error::invalid("min_step", "must lie in (0, h]"));
        }
        Ok(())
    }
}

/// One implicit step of size `h`: solve `h P w + w^N = density`, return `w^N`.
pub fn step_unrescaled(state: &FlowState, params: &FlowParams, h: f64) -> Result<FlowState> {
    let params = params.with_step(h)?;
    let prob = ResolventProblem::new(state.density.clone(), params)?;
    let sol = solve_resolvent(&prob)?;
    Ok(FlowState {
        t: state.t + h,
        density: sol.density(params.n_gamma()),
    })
}

pub fn run_unrescaled(state0: &FlowState, params: &FlowParams, opts: &RunOptions) -> Result<FlowTrace> {
    opts.validate()?;
    let mut trace = FlowTrace::default();
    trace.records.push(TraceRecord::of(state0, params)?);
    trace.states.push(state0.clone());
    let sup0 = state0.density.sup();
    if sup0 == 0.0 {
        trace.extinction = Some(state0.t);
        return Ok(trace);
    }
    let threshold = opts.extinction_ratio * sup0;
    let t_end = state0.t + opts.t_end;
    let mut state = state0.clone();
    let mut h = opts.h;
    let mut steps = 0usize;
    while t_end - state.t > 1e-12 * t_end {
        let dt = h.min(t_end - state.t);
        let next = step_unrescaled(&state, params, dt)?;
        let (m0, m1) = (state.mass(), next.mass());
        if m1 < (1.0 - opts.max_mass_drop) * m0 && 0.5 * h >= opts.min_step {
            h *= 0.5;
            continue;
        }
        state = next;
        if (t_end - state.t).abs() <= 1e-9 * t_end {
            state.t = t_end;
        }
        steps += 1;
        trace.records.push(TraceRecord::of(&state, params)?);
        if state.density.sup() < threshold {
            trace.extinction = Some(state.t);
            break;
        }
        if opts.snapshot_stride > 0 && steps.is_multiple_of(opts.snapshot_stride) {
            trace.push_state(&state);
        }
    }
    trace.push_state(&state);
    Ok(trace)
}

/// Extinction time `N U0^(N-1) / (q (N-1))` of constant data with density
/// `c = U0^N` under `d/dt U^N = -q U`.
pub fn constant_extinction_time(density: f64, n_gamma: f64, q_c: f64) -> f64 {
    let u0 = density.powf(1.0 / n_gamma);
    n_gamma * u0.powf(n_gamma - 1.0) / (q_c * (n_gamma - 1.0))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ExtinctionReport {
    /// Detected extinction time, `None` if the run reached the horizon.
    pub measured: Option<f64>,
    /// Closed-form extinction time of constant data `inf(density)`.
    pub lower: f64,
    /// Closed-form extinction time of constant data `sup(density)`.
    pub upper: f64,
    pub horizon: f64,
}

impl ExtinctionReport {
    pub fn finite(&self) -> bool {
        self.measured.is_some_and(|t| t < self.horizon)
    }

    /// Whether the measured time lies within the envelopes, with relative
    /// slack `tol`.
    pub fn bracketed(&self, tol: f64) -> bool {
        self.measured
            .is_some_and(|t| t >= self.lower * (1.0 - tol) && t <= self.upper * (1.0 + tol))
    }
}

/// Runs the un-rescaled flow until extinction or `horizon` and compares the
/// extinction time with the constant-data envelopes.
pub fn extinction_remark_check(
    state0: &FlowState,
    params: &FlowParams,
    h: f64,
    horizon: f64,
) -> Result<ExtinctionReport> {
    if !(params.q_c() > 0.0) {
        return Err(Error::invalid("q_c", "extinction requires positive curvature"));
    }
    let n = params.n_gamma();
    let lower = constant_extinction_time(state0.density.inf(), n, params.q_c());
    let upper = constant_extinction_time(state0.density.sup(), n, params.q_c());
    let trace = run_unrescaled(state0, params, &RunOptions::new(h, horizon).with_stride(0))?;
    Ok(ExtinctionReport {
        measured: trace.extinction.map(|t| t - state0.t),
        lower,
        upper,
        horizon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    fn params(q: f64) -> FlowParams {
        FlowParams::new(0.5, 3).unwrap().with_curvature(q).unwrap()
    }

    #[test]
    fn zero_and_constant_states_are_fixed() {
        let g = Grid::periodic(1, 16).unwrap();
        let zero = FlowState::new(0.0, Field::zeros(&g)).unwrap();
        let next = step_unrescaled(&zero, &params(0.0), 0.1).unwrap();
        assert!(next.density().values().iter().all(|&v| v == 0.0));
        assert_eq!(next.t(), 0.1);

        let c = FlowState::new(0.0, Field::constant(&g, 2.5)).unwrap();
        let next = step_unrescaled(&c, &params(0.0), 0.1).unwrap();
        for &v in next.density().values() {
            assert!((v - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_decay_matches_closed_form() {
        // N = 2: density (sqrt(c0) - t/2)^2
        let g = Grid::periodic(1, 8).unwrap();
        let c0: f64 = 1.0;
        let mut s = FlowState::new(0.0, Field::constant(&g, c0)).unwrap();
        let h = 1e-3;
        for _ in 0..1000 {
            s = step_unrescaled(&s, &params(1.0), h).unwrap();
        }
        let exact = (c0.sqrt() - 0.5).powi(2);
        assert!(
            (s.density().values()[0] - exact).abs() < 2.0 * h,
            "{}",
            s.density().values()[0]
        );
    }

    #[test]
    fn rejects_negative_density_and_bad_options() {
        let g = Grid::periodic(1, 8).unwrap();
        assert!(FlowState::new(0.0, Field::constant(&g, -1.0)).is_err());
        let s = FlowState::new(0.0, Field::constant(&g, 1.0)).unwrap();
        assert!(run_unrescaled(&s, &params(0.0), &RunOptions::new(0.0, 1.0)).is_err());
        assert!(extinction_remark_check(&s, &params(0.0), 0.1, 1.0).is_err());
    }

    #[test]
    fn zero_data_extinguishes_at_start() {
        let g = Grid::periodic(1, 8).unwrap();
        let s = FlowState::new(0.0, Field::zeros(&g)).unwrap();
        let rep = extinction_remark_check(&s, &params(1.0), 0.01, 5.0).unwrap();
        assert_eq!(rep.measured, Some(0.0));
    }

    #[test]
    fn trace_csv_header_and_rows() {
        let g = Grid::periodic(1, 8).unwrap();
        let s = FlowState::new(0.0, Field::constant(&g, 1.0)).unwrap();
        let trace = run_unrescaled(&s, &params(0.0), &RunOptions::new(0.5, 1.0)).unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], TRACE_HEADER);
        assert_eq!(lines.len(), 4);
        assert!(lines[3].starts_with("1,"));
        assert_eq!(trace.states.len(), 3);
    }

    #[test]
    fn extinction_step_halving_resolves_t_star() {
        let g = Grid::periodic(1, 4).unwrap();
        let s = FlowState::new(0.0, Field::constant(&g, 1.0)).unwrap();
        let rep = extinction_remark_check(&s, &params(1.0), 1e-2, 10.0).unwrap();
        let t = rep.measured.unwrap();
        assert!((t - 2.0).abs() < 0.04, "{t}");
        assert!((rep.lower - 2.0).abs() < 1e-12 && (rep.upper - 2.0).abs() < 1e-12);
    }
}
