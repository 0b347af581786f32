//! The volume-preserving flow `d/dt w^N = -P w + q(t) w^N`.
//!
//! Two routes: stepping it directly with exact volume renormalization, or
//! rescaling an un-rescaled trace with `v = e^F u` (densities) where
//! `e^F = mass(0) / mass(tau)`. Substituting into the rescaled equation gives
//! the time change `dt/dtau = e^{F (1 - 1/N)}`, integrated by the trapezoid
//! rule on the recorded times.

use serde::Serialize;

use super::{FlowState, FlowTrace, RunOptions, TraceRecord};
use crate::error::{Error, Result};
use crate::grid::Field;
use crate::params::FlowParams;
use crate::resolvent::{solve_resolvent, ResolventProblem};
use crate::spectral::dirichlet_energy;

#[derive(Clone, Debug)]
pub struct RescaledStep {
    pub state: FlowState,
    /// `q = int w P w / int w^(N+1)` evaluated on the incoming state.
    pub q: f64,
}

/// Resolvent step for the diffusion, multiplication of the density by
/// `e^{h q}`, then scaling `w` so that `int w^(N+1)` equals its incoming
/// value.
pub fn step_rescaled_direct(state: &FlowState, params: &FlowParams, h: f64) -> Result<RescaledStep> {
    let params = params.with_step(h)?;
    let n = params.n_gamma();
    let w = state.conformal_factor(n);
    let volume = state.volume(n);
    if !(volume > 0.0) {
        return Err(Error::VanishingVolume);
    }
    let q = dirichlet_energy(&w, &params)? / volume;

    let sol = solve_resolvent(&ResolventProblem::new(state.density.clone(), params)?)?;
    let growth = (h * q).exp();
    let density = sol.density(n).map(|v| v * growth);
    let next_volume = density.map(|v| v.powf((n + 1.0) / n)).integral();
    if !(next_volume > 0.0) || !next_volume.is_finite() {
        return Err(Error::VanishingVolume);
    }
    // w -> lambda w scales the density by lambda^N and the volume by lambda^(N+1)
    let factor = (volume / next_volume).powf(n / (n + 1.0));
    Ok(RescaledStep {
        state: FlowState {
            t: state.t + h,
            density: density.map(|v| v * factor),
        },
        q,
    })
}

/// Runs [`step_rescaled_direct`] with the fixed step `opts.h` up to
/// `opts.t_end`. Returns the trace and the `q` of every step.
pub fn run_rescaled_direct(
    state0: &FlowState,
    params: &FlowParams,
    opts: &RunOptions,
) -> Result<(FlowTrace, Vec<f64>)> {
    opts.validate()?;
    let mut trace = FlowTrace::default();
    trace.records.push(TraceRecord::of(state0, params)?);
    trace.states.push(state0.clone());
    let mut qs = Vec::new();
    let t_end = state0.t + opts.t_end;
    let mut state = state0.clone();
    let mut steps = 0usize;
    while t_end - state.t > 1e-12 * t_end {
        let dt = opts.h.min(t_end - state.t);
        let step = step_rescaled_direct(&state, params, dt)?;
        state = step.state;
        if (t_end - state.t).abs() <= 1e-9 * t_end {
            state.t = t_end;
        }
        qs.push(step.q);
        steps += 1;
        trace.records.push(TraceRecord::of(&state, params)?);
        if opts.snapshot_stride > 0 && steps.is_multiple_of(opts.snapshot_stride) {
            trace.push_state(&state);
        }
    }
    trace.push_state(&state);
    Ok((trace, qs))
}

/// Samples of `F` against both time variables.
#[derive(Clone, Debug, Default, Serialize)]
pub struct RescaleMap {
    /// Un-rescaled times.
    pub tau: Vec<f64>,
    /// Rescaled times.
    pub t: Vec<f64>,
    pub f: Vec<f64>,
}

impl RescaleMap {
    /// Rescaled time at un-rescaled time `tau`, linear between samples.
    pub fn t_of_tau(&self, tau: f64) -> f64 {
        interpolate(&self.tau, &self.t, tau)
    }

    pub fn tau_of_t(&self, t: f64) -> f64 {
        interpolate(&self.t, &self.tau, t)
    }

    pub fn strictly_increasing(&self) -> bool {
        self.t.windows(2).all(|w| w[1] > w[0]) && self.tau.windows(2).all(|w| w[1] > w[0])
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let k = xs.partition_point(|&v| v <= x);
    if k == 0 {
        return ys[0];
    }
    if k == xs.len() {
        return ys[xs.len() - 1];
    }
    let s = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
    ys[k - 1] + s * (ys[k] - ys[k - 1])
}

#[derive(Clone, Debug)]
pub struct RescaledTrajectory {
    pub map: RescaleMap,
    /// Rescaled densities `e^F u` at rescaled times, one per stored state.
    pub states: Vec<FlowState>,
    /// `int v` per stored state; constant by construction.
    pub mass_ledger: Vec<f64>,
    /// `int v^((N+1)/N)` per stored state; not held fixed by this route.
    pub volume_ledger: Vec<f64>,
}

impl RescaledTrajectory {
    /// Density at rescaled time `t`, linear in the density between stored
    /// states.
    pub fn sample(&self, t: f64) -> Result<Field> {
        let first = &self.states[0];
        let last = &self.states[self.states.len() - 1];
        if !(t >= first.t && t <= last.t) {
            return Err(Error::invalid(
                "t",
                format!("outside the trajectory [{}, {}] (got {t})", first.t, last.t),
            ));
        }
        let k = self.states.partition_point(|s| s.t <= t);
        if k == self.states.len() {
            return Ok(last.density.clone());
        }
        let (a, b) = (&self.states[k - 1], &self.states[k]);
        let s = (t - a.t) / (b.t - a.t);
        a.density.zip_map(&b.density, |x, y| (1.0 - s) * x + s * y)
    }
}

pub fn rescale_via_time_change(trace: &FlowTrace, params: &FlowParams) -> Result<RescaledTrajectory> {
    if trace.records.is_empty() || trace.states.is_empty() {
        return Err(Error::invalid("trace", "is empty"));
    }
    if let Some(t) = trace.extinction {
        return Err(Error::VanishingMass { t });
    }
    let n = params.n_gamma();
    let m0 = trace.records[0].mass;
    let mut map = RescaleMap::default();
    for r in &trace.records {
        if !(r.mass > 0.0) {
            return Err(Error::VanishingMass { t: r.t });
        }
        let f = (m0 / r.mass).ln();
        let t = match (map.tau.last(), map.f.last(), map.t.last()) {
            (Some(&tau0), Some(&f0), Some(&t0)) => {
                let rate = |f: f64| (f * (1.0 - 1.0 / n)).exp();
                t0 + 0.5 * (r.t - tau0) * (rate(f0) + rate(f))
            }
            _ => 0.0,
        };
        map.tau.push(r.t);
        map.t.push(t);
        map.f.push(f);
    }

    let mut states = Vec::with_capacity(trace.states.len());
    let mut mass_ledger = Vec::with_capacity(trace.states.len());
    let mut volume_ledger = Vec::with_capacity(trace.states.len());
    for s in &trace.states {
        let mass = s.mass();
        if !(mass > 0.0) {
            return Err(Error::VanishingMass { t: s.t });
        }
        let v = s.density.scale(m0 / mass);
        mass_ledger.push(v.integral());
        volume_ledger.push(v.map(|x| x.powf((n + 1.0) / n)).integral());
        states.push(FlowState {
            t: map.t_of_tau(s.t),
            density: v,
        });
    }
    Ok(RescaledTrajectory {
        map,
        states,
        mass_ledger,
        volume_ledger,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::run_unrescaled;
    use crate::grid::Grid;

    #[test]
    fn constants_are_fixed_points_of_direct_step() {
        let g = Grid::periodic(1, 16).unwrap();
        let p = FlowParams::new(0.5, 3).unwrap().with_curvature(1.0).unwrap();
        let c: f64 = 1.7;
        let s = FlowState::from_conformal_factor(0.0, &Field::constant(&g, c), 2.0).unwrap();
        let step = step_rescaled_direct(&s, &p, 0.1).unwrap();
        // q = Q0 c^(1-N)
        assert!((step.q - c.powf(-1.0)).abs() < 1e-12);
        for &v in step.state.density().values() {
            assert!((v - c * c).abs() < 1e-10 * c * c);
        }
    }

    #[test]
    fn constant_trace_rescales_affinely() {
        let g = Grid::periodic(1, 8).unwrap();
        let p = FlowParams::new(0.5, 3).unwrap().with_curvature(1.0).unwrap();
        let s = FlowState::new(0.0, Field::constant(&g, 1.0)).unwrap();
        let trace = run_unrescaled(&s, &p, &RunOptions::new(0.01, 0.5)).unwrap();
        let r = rescale_via_time_change(&trace, &p).unwrap();
        assert!(r.map.strictly_increasing());
        for st in &r.states {
            for &v in st.density().values() {
                assert!((v - 1.0).abs() < 1e-12);
            }
        }
        // e^F = 1 / (1 - tau/2)^2, rate (1 - tau/2)^(-1): t = -2 ln(1 - tau/2)
        let tau_end = *r.map.tau.last().unwrap();
        let exact = -2.0 * (1.0 - 0.5 * tau_end).ln();
        assert!((r.map.t.last().unwrap() - exact).abs() < 1e-3);
    }

    #[test]
    fn sample_interpolates_linearly() {
        let g = Grid::periodic(1, 4).unwrap();
        let traj = RescaledTrajectory {
            map: RescaleMap::default(),
            states: vec![
                FlowState::new(0.0, Field::constant(&g, 1.0)).unwrap(),
                FlowState::new(2.0, Field::constant(&g, 3.0)).unwrap(),
            ],
            mass_ledger: vec![],
            volume_ledger: vec![],
        };
        assert_eq!(traj.sample(0.5).unwrap().values()[0], 1.5);
        assert_eq!(traj.sample(2.0).unwrap().values()[0], 3.0);
        assert!(traj.sample(2.5).is_err());
    }

    #[test]
    fn extinct_trace_cannot_be_rescaled() {
        let trace = FlowTrace {
            records: vec![],
            states: vec![],
            extinction: Some(1.0),
        };
        let p = FlowParams::new(0.5, 3).unwrap();
        assert!(rescale_via_time_change(&trace, &p).is_err());
    }
}
