//! One runner per command. Each writes its artifacts into the output
//! directory and returns the check records of the run.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde_json::json;

use fracyamabe::conformal::{
    bubble, kelvin_transform, stereographic_inverse, stroock_varopoulos_check, CheckRecord, PointCloudField,
};
use fracyamabe::extension::{check_harnack_fks, mode_error, ExtensionMesh, HarnackExperiment};
use fracyamabe::flow::{
    constant_extinction_time, nontrivial_branch_residual, ode_mode, rescale_via_time_change,
    run_rescaled_direct, run_unrescaled, FlowState, FlowTrace, OdeBranch, OdeSign,
};
use fracyamabe::io::{write_field_binary, write_field_csv};
use fracyamabe::profiles::random_smooth_positive;
use fracyamabe::resolvent::{check_t_contraction, solve_resolvent_with, ResolventOptions, ResolventProblem};
use fracyamabe::rng::check_rng;
use fracyamabe::{Field, Result};

use crate::config::{Command, RescaleRoute, RunConfig};

fn record(check: &str, parameters: serde_json::Value, lhs: f64, rhs: f64, pass: bool) -> CheckRecord {
    CheckRecord {
        check: check.to_string(),
        parameters,
        lhs,
        rhs,
        pass,
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

pub fn run(config: &RunConfig) -> Result<Vec<CheckRecord>> {
    let dir = &config.output.dir;
    fs::create_dir_all(dir)?;
    match config.command {
        Command::FlowUnrescaled => flow_unrescaled(config, dir),
        Command::FlowRescaled => flow_rescaled(config, dir),
        Command::Ode => ode(config, dir),
        Command::Resolvent => resolvent(config, dir),
        Command::ExtensionCheck => extension_check(config, dir),
        Command::Diagnostics => diagnostics(config, dir),
    }
}

fn write_snapshots(trace: &FlowTrace, stride: usize, dir: &Path) -> Result<()> {
    if stride == 0 {
        return Ok(());
    }
    let snap = dir.join("snapshots");
    fs::create_dir_all(&snap)?;
    for (k, s) in trace.states.iter().enumerate() {
        let mut out = BufWriter::new(File::create(snap.join(format!("state_{k:06}.bin")))?);
        write_field_binary(s.density(), &mut out)?;
        out.flush()?;
    }
    Ok(())
}

fn initial_density(config: &RunConfig) -> Result<Field> {
    Ok(config.initial.sample(&config.grid()?))
}

fn flow_unrescaled(config: &RunConfig, dir: &Path) -> Result<Vec<CheckRecord>> {
    let p = config.flow_params()?;
    let state = FlowState::new(0.0, initial_density(config)?)?;
    let trace = run_unrescaled(&state, &p, &config.run_options())?;
    let mut out = create(dir, "trace.csv")?;
    trace.write_csv(&mut out)?;
    out.flush()?;
    write_snapshots(&trace, config.run.snapshot_stride, dir)?;

    let params = json!({"gamma": p.gamma(), "n": p.n(), "q_c": p.q_c(), "h": p.h()});
    let mut records = Vec::new();
    let m0 = trace.records[0].mass;
    if p.q_c() == 0.0 {
        let drift = trace
            .records
            .iter()
            .map(|r| (r.mass - m0).abs() / m0)
            .fold(0.0, f64::max);
        records.push(record(
            "mass-conservation",
            params.clone(),
            drift,
            1e-8,
            drift <= 1e-8,
        ));
    }
    let worst_rise = trace
        .records
        .windows(2)
        .map(|w| (w[1].dirichlet_energy - w[0].dirichlet_energy) / w[0].dirichlet_energy.abs().max(1e-300))
        .fold(f64::NEG_INFINITY, f64::max);
    if worst_rise.is_finite() {
        records.push(record(
            "energy-dissipation",
            params.clone(),
            worst_rise,
            1e-10,
            worst_rise <= 1e-10,
        ));
    }
    if let Some(t) = trace.extinction {
        let d = state.density();
        let (lo, hi) = (
            constant_extinction_time(d.inf(), p.n_gamma(), p.q_c()),
            constant_extinction_time(d.sup(), p.n_gamma(), p.q_c()),
        );
        records.push(record(
            "extinction-time",
            json!({"gamma": p.gamma(), "n": p.n(), "q_c": p.q_c(), "h": p.h(), "lower": lo, "upper": hi}),
            t,
            hi,
            t >= lo * 0.98 && t <= hi * 1.02,
        ));
    }
    Ok(records)
}

fn flow_rescaled(config: &RunConfig, dir: &Path) -> Result<Vec<CheckRecord>> {
    let p = config.flow_params()?;
    let state = FlowState::new(0.0, initial_density(config)?)?;
    let params =
        json!({"gamma": p.gamma(), "n": p.n(), "q_c": p.q_c(), "h": p.h(), "route": config.run.route});
    let mut records = Vec::new();
    match config.run.route {
        RescaleRoute::Direct => {
            let (trace, qs) = run_rescaled_direct(&state, &p, &config.run_options())?;
            let mut out = create(dir, "trace.csv")?;
            trace.write_csv(&mut out)?;
            out.flush()?;
            let mut out = create(dir, "q.csv")?;
            writeln!(out, "t,q")?;
            for (r, q) in trace.records.iter().skip(1).zip(&qs) {
                writeln!(out, "{},{}", r.t, q)?;
            }
            out.flush()?;
            write_snapshots(&trace, config.run.snapshot_stride, dir)?;

            let v0 = trace.records[0].volume;
            let drift = trace
                .records
                .iter()
                .map(|r| (r.volume - v0).abs() / v0)
                .fold(0.0, f64::max);
            records.push(record(
                "volume-preservation",
                params.clone(),
                drift,
                1e-6,
                drift <= 1e-6,
            ));
            let h0 = trace.records[0].harnack_quotient;
            let peak = trace
                .records
                .iter()
                .map(|r| r.harnack_quotient)
                .fold(0.0, f64::max);
            let bound = h0 * (1.0 + config.run.harnack_margin);
            records.push(record("harnack-bound", params, peak, bound, peak <= bound));
        }
        RescaleRoute::TimeChange => {
            let trace = run_unrescaled(&state, &p, &config.run_options().with_stride(1))?;
            let r = rescale_via_time_change(&trace, &p)?;
            let mut out = create(dir, "time_map.csv")?;
            writeln!(out, "tau,t,F")?;
            for ((tau, t), f) in r.map.tau.iter().zip(&r.map.t).zip(&r.map.f) {
                writeln!(out, "{tau},{t},{f}")?;
            }
            out.flush()?;
            let mut out = create(dir, "ledgers.csv")?;
            writeln!(out, "t,mass,volume")?;
            for ((s, m), v) in r.states.iter().zip(&r.mass_ledger).zip(&r.volume_ledger) {
                writeln!(out, "{},{m},{v}", s.t())?;
            }
            out.flush()?;
            if config.run.snapshot_stride > 0 {
                let snap = dir.join("snapshots");
                fs::create_dir_all(&snap)?;
                for (k, s) in r.states.iter().enumerate().step_by(config.run.snapshot_stride) {
                    let mut f = BufWriter::new(File::create(snap.join(format!("state_{k:06}.bin")))?);
                    write_field_binary(s.density(), &mut f)?;
                    f.flush()?;
                }
            }
            let m0 = r.mass_ledger[0];
            let drift = r
                .mass_ledger
                .iter()
                .map(|m| (m - m0).abs() / m0)
                .fold(0.0, f64::max);
            records.push(record(
                "rescaled-mass",
                params.clone(),
                drift,
                1e-6,
                drift <= 1e-6,
            ));
            let monotone = r.map.strictly_increasing();
            records.push(record(
                "time-map-monotone",
                params,
                monotone as u8 as f64,
                1.0,
                monotone,
            ));
        }
    }
    Ok(records)
}

fn ode(config: &RunConfig, dir: &Path) -> Result<Vec<CheckRecord>> {
    let o = &config.ode;
    let sign = OdeSign::from_int(o.sign)?;
    let tr = ode_mode(o.exponent, sign, o.u0, o.h, o.t_end, o.policy)?;
    let mut out = create(dir, "ode.csv")?;
    writeln!(out, "t,U")?;
    for (t, u) in tr.times.iter().zip(&tr.values) {
        writeln!(out, "{t},{u}")?;
    }
    out.flush()?;
    let params = json!({"exponent": o.exponent, "sign": o.sign, "u0": o.u0, "h": o.h, "policy": o.policy});
    let mut records = Vec::new();
    match sign {
        OdeSign::Positive => {
            let exact = constant_extinction_time(o.u0.powf(o.exponent), o.exponent, 1.0);
            let (t, pass) = match tr.extinction {
                Some(t) => (t, (t - exact).abs() <= 0.02 * exact.max(o.h)),
                None => (f64::INFINITY, false),
            };
            records.push(record("extinction-time", params, t, exact, pass));
        }
        OdeSign::Negative => {
            let residual = nontrivial_branch_residual(o.exponent, &tr.times);
            records.push(record(
                "nontrivial-branch-substitution",
                params.clone(),
                residual,
                1e-10,
                residual <= 1e-10,
            ));
            if let Some(branch) = tr.branch {
                let selected = json!({
                    "exponent": o.exponent, "policy": o.policy,
                    "selected": branch,
                    "distance_trivial": tr.distance_trivial,
                    "distance_nontrivial": tr.distance_nontrivial,
                });
                let (lhs, rhs) = match branch {
                    OdeBranch::Trivial => (tr.distance_trivial, tr.distance_nontrivial),
                    OdeBranch::Nontrivial => (tr.distance_nontrivial, tr.distance_trivial),
                };
                records.push(record("branch-selection", selected, lhs, rhs, lhs <= rhs));
            }
        }
    }
    Ok(records)
}

fn resolvent(config: &RunConfig, dir: &Path) -> Result<Vec<CheckRecord>> {
    let p = config.flow_params()?;
    let g = initial_density(config)?;
    let prob = ResolventProblem::new(g, p)?;
    let mut log = Vec::new();
    let sol = solve_resolvent_with(&prob, &ResolventOptions::default(), |r| log.push(*r))?;
    let mut out = create(dir, "iterations.jsonl")?;
    for r in &log {
        writeln!(out, "{}", serde_json::to_string(r).expect("record serializes"))?;
    }
    out.flush()?;
    let mut out = create(dir, "solution.csv")?;
    write_field_csv(&sol.w, &mut out)?;
    out.flush()?;
    let mut out = create(dir, "solution.bin")?;
    write_field_binary(&sol.w, &mut out)?;
    out.flush()?;
    let params =
        json!({"gamma": p.gamma(), "n": p.n(), "q_c": p.q_c(), "h": p.h(), "iterations": sol.iterations});
    let tol = p.tol_resolvent();
    Ok(vec![record(
        "resolvent-residual",
        params,
        sol.relative_residual,
        tol,
        sol.relative_residual <= tol,
    )])
}

fn extension_check(config: &RunConfig, _dir: &Path) -> Result<Vec<CheckRecord>> {
    let grid = config.grid()?;
    let gamma = config.params.gamma;
    let mesh = ExtensionMesh::new(&grid, gamma, config.mesh_spec())?;
    let tol = config.extension.tolerance;
    config
        .extension
        .modes
        .par_iter()
        .map(|&k| {
            let r = mode_error(&mesh, k)?;
            Ok(record(
                "extension-mode",
                json!({"gamma": gamma, "mode": k, "points": grid.points_per_axis(), "levels": r.mesh_size}),
                r.relative_error,
                tol,
                r.relative_error <= tol,
            ))
        })
        .collect()
}

const SV_STREAM: u64 = 0x5356_0000;
const CONTRACTION_STREAM: u64 = 0x5443_0000;
const KELVIN_STREAM: u64 = 0x4b45_4c56;
const SPHERE_STREAM: u64 = 0x5354_4552;

fn random_point(rng: &mut impl Rng, dim: usize, max_norm: f64) -> Vec<f64> {
    let dir: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let len = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    let r = 10f64.powf(rng.random_range(-3.0..max_norm.log10()));
    dir.iter().map(|v| r * v / len).collect()
}

fn diagnostics(config: &RunConfig, _dir: &Path) -> Result<Vec<CheckRecord>> {
    let grid = config.grid()?;
    let p = config.flow_params()?;
    let d = &config.diagnostics;
    let seed = config.seed;
    let gamma = p.gamma();

    let sv: Vec<Vec<CheckRecord>> = (0..d.trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = check_rng(seed, SV_STREAM + trial);
            let v = random_smooth_positive(
                &grid,
                rng.random_range(0.2..2.0),
                rng.random_range(0.1..1.5),
                6,
                rng.random(),
            );
            d.sv_exponents
                .iter()
                .map(|&q| {
                    let r = stroock_varopoulos_check(&v, gamma, q)?;
                    let pass = if q == 2.0 {
                        (r.lhs - r.rhs).abs() <= 1e-12 * r.lhs.abs().max(1.0)
                    } else {
                        r.holds(1e-10 * r.lhs.abs().max(1.0))
                    };
                    Ok(record(
                        "stroock-varopoulos",
                        json!({"trial": trial, "gamma": gamma, "q": q}),
                        r.lhs,
                        r.rhs,
                        pass,
                    ))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let contraction: Vec<CheckRecord> = (0..d.trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = check_rng(seed, CONTRACTION_STREAM + trial);
            let g1 = random_smooth_positive(&grid, 1.0, 1.0, 4, rng.random());
            let g2 = random_smooth_positive(&grid, 1.0, 1.0, 4, rng.random());
            let r = check_t_contraction(&g1, &g2, &p)?;
            Ok(record(
                "t-contraction",
                json!({"trial": trial, "gamma": gamma, "q_c": p.q_c(), "h": p.h()}),
                r.lhs,
                r.rhs,
                r.holds(1e-8),
            ))
        })
        .collect::<Result<_>>()?;

    let n = p.n();
    let mut rng = check_rng(seed, KELVIN_STREAM);
    let points: Vec<Vec<f64>> = (0..d.kelvin_points)
        .map(|_| random_point(&mut rng, n, 1e3))
        .collect();
    let f = PointCloudField::from_fn(points.clone(), |x| 1.0 + 0.5 * x[0].sin());
    let twice = kelvin_transform(&kelvin_transform(&f, n, gamma)?, n, gamma)?;
    let involution = f
        .values()
        .iter()
        .zip(twice.values())
        .map(|(a, b)| (a - b).abs() / a.abs())
        .fold(0.0, f64::max);
    let b = kelvin_transform(
        &PointCloudField::from_fn(points, |x| bubble(x, n, gamma)),
        n,
        gamma,
    )?;
    let fixed = b
        .points()
        .iter()
        .zip(b.values())
        .map(|(y, v)| (v - bubble(y, n, gamma)).abs() / v)
        .fold(0.0, f64::max);
    let mut rng = check_rng(seed, SPHERE_STREAM);
    let sphere = (0..10 * d.kelvin_points)
        .map(|_| {
            let s = stereographic_inverse(&random_point(&mut rng, n, 1e6));
            (s.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).abs()
        })
        .fold(0.0, f64::max);

    let exp = HarnackExperiment {
        gamma,
        trials: d.harnack_trials,
        cells_per_radius: d.harnack_cells,
        seed,
        ..HarnackExperiment::default()
    };
    let h = check_harnack_fks(&exp)?;

    let mut records: Vec<CheckRecord> = sv.into_iter().flatten().collect();
    records.extend(contraction);
    let pts = json!({"points": d.kelvin_points, "n": n, "gamma": gamma});
    records.push(record(
        "kelvin-involution",
        pts.clone(),
        involution,
        1e-12,
        involution <= 1e-12,
    ));
    records.push(record("bubble-fixed-point", pts, fixed, 1e-12, fixed <= 1e-12));
    records.push(record(
        "stereographic-norm",
        json!({"points": 10 * d.kelvin_points, "n": n}),
        sphere,
        1e-14,
        sphere <= 1e-14,
    ));
    let radii: Vec<f64> = h.scales.iter().map(|s| s.max_ratio).collect();
    records.push(record(
        "harnack-scale-spread",
        json!({"gamma": gamma, "trials": d.harnack_trials, "cells_per_radius": d.harnack_cells, "max_ratios": radii}),
        h.scale_spread,
        1.2,
        h.scale_spread <= 1.2,
    ));
    Ok(records)
}
