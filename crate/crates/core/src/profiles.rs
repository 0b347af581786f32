//! Initial data used by the CLI presets and the test suites.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::grid::{Field, Grid};
use crate::rng::check_rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Profile {
    /// `value` everywhere.
    Constant { value: f64 },
    /// `base + amplitude * cos(mode * x_0)`.
    Cosine { base: f64, amplitude: f64, mode: u32 },
    /// Smooth positive field: `base * exp(sum of random low modes)`.
    Random {
        base: f64,
        amplitude: f64,
        modes: u32,
        seed: u64,
    },
}

impl Profile {
    pub fn sample(&self, grid: &Grid) -> Field {
        match *self {
            Profile::Constant { value } => Field::constant(grid, value),
            Profile::Cosine {
                base,
                amplitude,
                mode,
            } => Field::from_fn(grid, |x| base + amplitude * (mode as f64 * x[0]).cos()),
            Profile::Random {
                base,
                amplitude,
                modes,
                seed,
            } => random_smooth_positive(grid, base, amplitude, modes, seed),
        }
    }
}

/// `base * exp(amplitude * s(x))` where `s` is a random trigonometric
/// polynomial with wavenumbers up to `modes` per axis, normalized to
/// `max |s| = 1`.
pub fn random_smooth_positive(grid: &Grid, base: f64, amplitude: f64, modes: u32, seed: u64) -> Field {
    let mut rng = check_rng(seed, 0x5052_4f46); // "PROF"
    let dim = grid.dim();
    let terms: Vec<([f64; 3], f64, f64)> = (0..modes.max(1) * dim as u32)
        .map(|_| {
            let mut k = [0.0; 3];
            for slot in k.iter_mut().take(dim) {
                *slot = rng.random_range(-(modes as i32)..=modes as i32) as f64;
            }
            (
                k,
                rng.random_range(-1.0..1.0),
                rng.random_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    let s = Field::from_fn(grid, |x| {
        terms
            .iter()
            .map(|(k, c, phase)| {
                let arg: f64 = (0..dim).map(|a| k[a] * x[a]).sum();
                c * (arg + phase).cos()
            })
            .sum()
    });
    let scale = s.lp_norm(f64::INFINITY).unwrap_or(1.0).max(f64::MIN_POSITIVE);
    s.map(|v| base * (amplitude * v / scale).exp())
}
