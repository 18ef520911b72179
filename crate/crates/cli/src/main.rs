//! `subdiff`: mesh generation and certification, operator analysis, single
//! solves, table reproduction and stability soaks.

mod args;
mod commands;

use std::ffi::OsString;
use std::path::Path;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches};

use args::Cli;

/// Outcome classes, each with its own exit code.
#[derive(Debug)]
pub enum Failure {
    Validation(String),
    Numerical(String),
    Tolerance(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Numerical(_) => 2,
            Failure::Tolerance(_) => 3,
        }
    }

    fn report(&self) {
        let (kind, msg) = match self {
            Failure::Validation(m) => ("validation", m),
            Failure::Numerical(m) => ("numerical", m),
            Failure::Tolerance(m) => ("tolerance", m),
        };
        eprintln!("error[{kind}]: {msg}");
    }
}

impl From<subdiff::Error> for Failure {
    fn from(e: subdiff::Error) -> Self {
        if e.is_validation() {
            Failure::Validation(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Validation(e.to_string())
    }
}

/// Flags derived from a TOML config file: scalars become `--key value`,
/// arrays a comma-joined value, `true` a bare `--key`.
fn config_flags(path: &Path) -> Result<Vec<OsString>, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Validation(format!("cannot read config {}: {e}", path.display())))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| Failure::Validation(format!("config {}: {e}", path.display())))?;
    let scalar = |key: &str, v: &toml::Value| -> Result<String, Failure> {
        match v {
            toml::Value::String(s) => Ok(s.clone()),
            toml::Value::Integer(i) => Ok(i.to_string()),
            toml::Value::Float(f) => Ok(f.to_string()),
            _ => Err(Failure::Validation(format!("config key {key:?}: unsupported value {v}"))),
        }
    };
    let mut flags = Vec::new();
    for (key, value) in &table {
        let flag = format!("--{key}");
        match value {
            toml::Value::Boolean(true) => flags.push(flag.into()),
            toml::Value::Boolean(false) => {}
            toml::Value::Array(items) => {
                let joined = items
                    .iter()
                    .map(|v| scalar(key, v))
                    .collect::<Result<Vec<_>, _>>()?
                    .join(",");
                flags.push(flag.into());
                flags.push(joined.into());
            }
            other => {
                flags.push(flag.into());
                flags.push(scalar(key, other)?.into());
            }
        }
    }
    Ok(flags)
}

/// Path given by `--config PATH` or `--config=PATH`, if any.
fn find_config(argv: &[OsString]) -> Option<std::path::PathBuf> {
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(Into::into);
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(p.into());
        }
    }
    None
}

fn configure_workers() -> Result<(), Failure> {
    let Ok(value) = std::env::var("SUBDIFF_WORKERS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Validation(format!("SUBDIFF_WORKERS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Numerical(e.to_string()))
}

/// Parses `argv` (config flags appended last so they win) and runs the command.
pub fn dispatch(argv: Vec<OsString>) -> Result<(), Failure> {
    let mut argv = argv;
    if let Some(path) = find_config(&argv) {
        argv.extend(config_flags(&path)?);
    }
    let command = Cli::command()
        .args_override_self(true)
        .mut_subcommands(|s| s.args_override_self(true));
    let matches = match command.try_get_matches_from(argv.iter()) {
        Ok(m) => m,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return Ok(());
        }
        Err(e) => {
            let text = e.render().to_string();
            let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
            return Err(Failure::Validation(first.to_string()));
        }
    };
    let cli = Cli::from_arg_matches(&matches).map_err(|e| Failure::Validation(e.to_string()))?;
    configure_workers()?;
    let invocation = argv
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join(" ");
    commands::run(cli, &invocation)
}

fn main() -> ExitCode {
    match dispatch(std::env::args_os().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            f.report();
            ExitCode::from(f.code())
        }
    }
}
