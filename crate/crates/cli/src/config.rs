//! Run configuration: a TOML file with one section per module, overridden by
//! `--set section.key=value` flags. Unknown keys are rejected.

use std::f64::consts::PI;
use std::path::PathBuf;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use fracyamabe::extension::MeshSpec;
use fracyamabe::flow::{OdeSign, RunOptions};
use fracyamabe::profiles::Profile;
use fracyamabe::resolvent::RootPolicy;
use fracyamabe::{FlowParams, Grid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    FlowUnrescaled,
    FlowRescaled,
    Ode,
    Resolvent,
    ExtensionCheck,
    Diagnostics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    /// Master seed; every check draws from its own stream of it.
    pub seed: u64,
    pub params: ParamsSection,
    pub grid: GridSection,
    pub mesh: MeshSection,
    pub initial: Profile,
    pub run: RunSection,
    pub ode: OdeSection,
    pub extension: ExtensionSection,
    pub diagnostics: DiagnosticsSection,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: Command::FlowUnrescaled,
            seed: 0,
            params: ParamsSection::default(),
            grid: GridSection::default(),
            mesh: MeshSection::default(),
            initial: Profile::Cosine {
                base: 1.0,
                amplitude: 0.3,
                mode: 1,
            },
            run: RunSection::default(),
            ode: OdeSection::default(),
            extension: ExtensionSection::default(),
            diagnostics: DiagnosticsSection::default(),
            output: OutputSection::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsSection {
    pub gamma: f64,
    pub n: usize,
    pub q_c: f64,
    pub h: f64,
    pub tol_resolvent: f64,
    pub max_iter: usize,
}

impl Default for ParamsSection {
    fn default() -> Self {
        ParamsSection {
            gamma: 0.5,
            n: 3,
            q_c: 0.0,
            h: 0.01,
            tol_resolvent: 1e-10,
            max_iter: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub dim: usize,
    pub points: usize,
    pub side: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            dim: 1,
            points: 64,
            side: 2.0 * PI,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshSection {
    pub levels: usize,
    pub height_factor: f64,
    pub beta: f64,
}

impl Default for MeshSection {
    fn default() -> Self {
        let m = MeshSpec::default();
        MeshSection {
            levels: m.levels,
            height_factor: m.height_factor,
            beta: m.beta,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RescaleRoute {
    Direct,
    TimeChange,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub t_end: f64,
    /// Write every `snapshot_stride`-th state; 0 disables snapshots.
    pub snapshot_stride: usize,
    pub extinction_ratio: f64,
    pub max_mass_drop: f64,
    /// Allowed growth of the Harnack quotient over its initial value.
    pub harnack_margin: f64,
    pub route: RescaleRoute,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            t_end: 1.0,
            snapshot_stride: 0,
            extinction_ratio: 1e-8,
            max_mass_drop: 0.2,
            harnack_margin: 0.5,
            route: RescaleRoute::Direct,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OdeSection {
    pub exponent: f64,
    pub sign: i64,
    pub u0: f64,
    pub h: f64,
    pub t_end: f64,
    pub policy: RootPolicy,
}

impl Default for OdeSection {
    fn default() -> Self {
        OdeSection {
            exponent: 2.0,
            sign: 1,
            u0: 1.0,
            h: 1e-3,
            t_end: 5.0,
            policy: RootPolicy::Continuation,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtensionSection {
    pub modes: Vec<usize>,
    /// Relative error allowed per mode.
    pub tolerance: f64,
}

impl Default for ExtensionSection {
    fn default() -> Self {
        ExtensionSection {
            modes: vec![1, 2, 3, 4],
            tolerance: 0.01,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsSection {
    pub trials: usize,
    pub sv_exponents: Vec<f64>,
    pub kelvin_points: usize,
    pub harnack_trials: usize,
    pub harnack_cells: usize,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        DiagnosticsSection {
            trials: 20,
            sv_exponents: vec![1.5, 2.0, 3.0],
            kelvin_points: 1000,
            harnack_trials: 4,
            harnack_cells: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("fyflow-out"),
        }
    }
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn config_err(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

/// Applies `section.key=value` to the table. The value is read as a TOML
/// value when it parses as one and as a string otherwise.
pub fn apply_override(table: &mut Table, assignment: &str) -> Result<(), ConfigError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| config_err(format!("override `{assignment}` is not of the form key=value")))?;
    let path = path.trim();
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("parsed table has key v"),
        Err(_) => Value::String(raw.to_string()),
    };
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(config_err(format!("malformed key `{path}`")));
    }
    let (last, parents) = keys.split_last().expect("split yields at least one key");
    let mut cursor = table;
    for key in parents {
        let entry = cursor
            .entry(key.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        cursor = entry
            .as_table_mut()
            .ok_or_else(|| config_err(format!("`{key}` in `{path}` is not a section")))?;
    }
    cursor.insert(last.to_string(), value);
    Ok(())
}

/// Merges file contents and overrides over the defaults, then validates.
pub fn parse_config(file: Option<&str>, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let mut table = match file {
        Some(text) => text
            .parse::<Table>()
            .map_err(|e| config_err(format!("config file: {e}")))?,
        None => Table::new(),
    };
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    let config: RunConfig =
        RunConfig::deserialize(table).map_err(|e| config_err(e.to_string().trim_end()))?;
    config.validate()?;
    Ok(config)
}

impl RunConfig {
    pub fn flow_params(&self) -> Result<FlowParams, fracyamabe::Error> {
        let p = &self.params;
        FlowParams::new(p.gamma, p.n)?
            .with_curvature(p.q_c)?
            .with_step(p.h)?
            .with_tolerance(p.tol_resolvent, p.max_iter)
    }

    pub fn grid(&self) -> Result<Grid, fracyamabe::Error> {
        Grid::new(self.grid.dim, self.grid.points, self.grid.side)
    }

    pub fn mesh_spec(&self) -> MeshSpec {
        MeshSpec {
            levels: self.mesh.levels,
            height_factor: self.mesh.height_factor,
            beta: self.mesh.beta,
        }
    }

    pub fn run_options(&self) -> RunOptions {
        let mut o = RunOptions::new(self.params.h, self.run.t_end).with_stride(self.run.snapshot_stride);
        o.extinction_ratio = self.run.extinction_ratio;
        o.max_mass_drop = self.run.max_mass_drop;
        o
    }

    /// Checks every numeric range; runs before any computation.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let lib = |e: fracyamabe::Error| config_err(e.to_string());
        self.flow_params().map_err(lib)?;
        self.grid().map_err(lib)?;
        let m = &self.mesh;
        if m.levels < 2 || !(m.height_factor >= 4.0) || !(m.beta >= 1.0) {
            return Err(config_err(format!(
                "mesh: need levels >= 2, height_factor >= 4, beta >= 1 (got {}, {}, {})",
                m.levels, m.height_factor, m.beta
            )));
        }
        match self.initial {
            Profile::Constant { value } if !(value >= 0.0) => {
                return Err(config_err("initial.value must be >= 0"));
            }
            Profile::Cosine { base, amplitude, .. } if !(base - amplitude.abs() >= 0.0) => {
                return Err(config_err(
                    "initial: cosine data must stay >= 0 (need base >= |amplitude|)",
                ));
            }
            Profile::Random { base, .. } if !(base > 0.0) => {
                return Err(config_err("initial.base must be positive"));
            }
            _ => {}
        }
        let r = &self.run;
        if !(r.t_end > 0.0 && r.t_end.is_finite()) {
            return Err(config_err(format!(
                "run.t_end must be positive (got {})",
                r.t_end
            )));
        }
        if !(r.extinction_ratio > 0.0 && r.extinction_ratio < 1.0) {
            return Err(config_err("run.extinction_ratio must lie in (0,1)"));
        }
        if !(r.max_mass_drop > 0.0 && r.max_mass_drop < 1.0) {
            return Err(config_err("run.max_mass_drop must lie in (0,1)"));
        }
        if !(r.harnack_margin >= 0.0) {
            return Err(config_err("run.harnack_margin must be >= 0"));
        }
        let o = &self.ode;
        OdeSign::from_int(o.sign).map_err(lib)?;
        if !(o.exponent > 1.0) || !(o.u0 >= 0.0) || !(o.h > 0.0) || !(o.t_end > 0.0) {
            return Err(config_err("ode: need exponent > 1, u0 >= 0, h > 0, t_end > 0"));
        }
        let e = &self.extension;
        if e.modes.is_empty() || e.modes.iter().any(|&k| k == 0 || k >= self.grid.points / 2) {
            return Err(config_err(format!(
                "extension.modes must be nonempty and lie in 1..{} (got {:?})",
                self.grid.points / 2,
                e.modes
            )));
        }
        if !(e.tolerance > 0.0) {
            return Err(config_err("extension.tolerance must be positive"));
        }
        let d = &self.diagnostics;
        if d.trials == 0 || d.kelvin_points == 0 || d.harnack_trials == 0 {
            return Err(config_err("diagnostics: trial counts must be positive"));
        }
        if d.sv_exponents.iter().any(|&q| !(q > 1.0)) {
            return Err(config_err("diagnostics.sv_exponents must all exceed 1"));
        }
        if d.harnack_cells < 4 || !d.harnack_cells.is_multiple_of(2) {
            return Err(config_err("diagnostics.harnack_cells must be even and >= 4"));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = parse_config(None, &[]).unwrap();
        assert_eq!(c, RunConfig::default());
        let back = parse_config(Some(&c.to_toml()), &[]).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn overrides_beat_file() {
        let file = "[params]\ngamma = 0.3\n";
        let c = parse_config(Some(file), &["params.gamma=0.7".into(), "command=ode".into()]).unwrap();
        assert_eq!(c.params.gamma, 0.7);
        assert_eq!(c.command, Command::Ode);
        let c = parse_config(Some(file), &[]).unwrap();
        assert_eq!(c.params.gamma, 0.3);
    }

    #[test]
    fn errors_name_the_problem() {
        let e = parse_config(None, &["params.gamma=1.2".into()]).unwrap_err();
        assert!(e.0.contains("gamma must lie in (0,1)"), "{e}");
        let e = parse_config(Some("[params]\ngama = 0.5\n"), &[]).unwrap_err();
        assert!(e.0.contains("gama"), "{e}");
        let e = parse_config(None, &["params".into()]).unwrap_err();
        assert!(e.0.contains("key=value"));
        let e = parse_config(None, &["extension.modes=[0]".into()]).unwrap_err();
        assert!(e.0.contains("extension.modes"));
    }

    #[test]
    fn initial_profile_sections() {
        let c = parse_config(Some("[initial]\nkind = \"constant\"\nvalue = 2.0\n"), &[]).unwrap();
        assert_eq!(c.initial, Profile::Constant { value: 2.0 });
        assert!(parse_config(Some("[initial]\nkind = \"constant\"\nvalu = 2.0\n"), &[]).is_err());
    }
}
