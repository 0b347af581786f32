//! `fyflow`: runs one command of the fractional Yamabe toolkit from a TOML
//! configuration and writes its artifacts and a JSON-lines report.
//!
//! Exit codes: 0 every check passed, 1 a check or the run failed, 2 the
//! configuration was rejected, 3 a solver did not converge.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use config::{parse_config, Command, ConfigError};

const PRESETS: &[(&str, &str)] = &[
    ("minimal", include_str!("../presets/minimal.toml")),
    ("ode", include_str!("../presets/ode.toml")),
    ("extension-check", include_str!("../presets/extension-check.toml")),
    ("diagnostics", include_str!("../presets/diagnostics.toml")),
];

#[derive(Parser, Debug)]
#[command(name = "fyflow", version, about = "Fractional Yamabe flow toolkit")]
struct Cli {
    /// Command to run; overrides `command` from the configuration.
    #[arg(value_enum)]
    command: Option<Command>,
    /// TOML configuration file.
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration: minimal, ode, extension-check, diagnostics.
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Override one key, e.g. `--set params.gamma=0.3`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Print the merged configuration and exit.
    #[arg(long)]
    echo_config: bool,
}

enum Failure {
    Config(String),
    Run(fracyamabe::Error),
    Checks(usize),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Run(fracyamabe::Error::NonConvergence { .. }) => 3,
            Failure::Run(_) | Failure::Checks(_) => 1,
        }
    }

    fn record(&self) -> serde_json::Value {
        let (kind, message) = match self {
            Failure::Config(m) => ("config", m.clone()),
            Failure::Run(e) => ("runtime", e.to_string()),
            Failure::Checks(n) => ("check", format!("{n} check(s) failed")),
        };
        json!({"error": kind, "exit_code": self.code(), "message": message})
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<fracyamabe::Error> for Failure {
    fn from(e: fracyamabe::Error) -> Self {
        Failure::Run(e)
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("FYFLOW_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| Failure::Config(format!("FYFLOW_THREADS must be a positive integer (got `{raw}`)")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Config(format!("thread pool: {e}")))
}

fn load(cli: &Cli) -> Result<config::RunConfig, Failure> {
    let text = match (&cli.config, &cli.preset) {
        (Some(path), _) => Some(
            fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?,
        ),
        (None, Some(name)) => {
            let found = PRESETS.iter().find(|(n, _)| n == name).ok_or_else(|| {
                let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
                Failure::Config(format!(
                    "unknown preset `{name}` (available: {})",
                    names.join(", ")
                ))
            })?;
            Some(found.1.to_string())
        }
        (None, None) => None,
    };
    let mut overrides = cli.overrides.clone();
    if let Some(c) = cli.command {
        let name = serde_json::to_value(c).expect("command serializes");
        overrides.push(format!("command={name}"));
    }
    if let Some(dir) = &cli.out {
        overrides.push(format!(
            "output.dir={}",
            toml::Value::String(dir.display().to_string())
        ));
    }
    Ok(parse_config(text.as_deref(), &overrides)?)
}

fn write_report(dir: &Path, records: &[fracyamabe::conformal::CheckRecord]) -> std::io::Result<()> {
    let mut out = fs::File::create(dir.join("report.jsonl"))?;
    let stdout = std::io::stdout();
    let mut stdout = stdout.lock();
    for r in records {
        let line = serde_json::to_string(r).expect("record serializes");
        writeln!(out, "{line}")?;
        writeln!(stdout, "{line}")?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), (Failure, Option<PathBuf>)> {
    configure_threads().map_err(|f| (f, None))?;
    let config = load(cli).map_err(|f| (f, None))?;
    if cli.echo_config {
        print!("{}", config.to_toml());
        return Ok(());
    }
    let dir = config.output.dir.clone();
    let fail = |f: Failure| (f, Some(dir.clone()));
    let records = commands::run(&config).map_err(|e| fail(e.into()))?;
    write_report(&dir, &records).map_err(|e| fail(fracyamabe::Error::from(e).into()))?;
    let failed = records.iter().filter(|r| !r.pass).count();
    if failed > 0 {
        return Err(fail(Failure::Checks(failed)));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err((failure, dir)) => {
            let record = failure.record();
            eprintln!("{record}");
            if let Some(dir) = dir {
                if fs::create_dir_all(&dir).is_ok() {
                    let _ = fs::write(dir.join("failure.json"), format!("{record}\n"));
                }
            }
            ExitCode::from(failure.code())
        }
    }
}
