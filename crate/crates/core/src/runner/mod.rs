//! Command layer behind the `ktcy` binary: `solve`, `verify`, `sweep` and `report`
//! against one output directory, with a checksummed `manifest.json`.
//!
//! Exit codes: 0 success, 2 usage or config error, 3 solver failure,
//! 4 failed estimate check, 5 missing or modified artifact, 1 other I/O errors.

mod config;
mod manifest;
mod report;
mod solve;
mod svg;
mod sweep;
mod verify;

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

pub use config::{DensitySource, GridSpec, RunConfig, SolverSettings};
pub use manifest::{sha256_file, FileEntry, Manifest, StageRecord, MANIFEST};
pub use report::cmd_report;
pub use solve::{cmd_solve, SOLUTION, DENSITY};
pub use svg::{line_plot, Axes, Series};
pub use sweep::{centered_distance, cmd_sweep, resample, SweepRow};
pub use verify::cmd_verify;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("solver: {0}")]
    Solver(String),
    #[error("{failures} estimate check(s) failed")]
    Verification { failures: usize },
    #[error("integrity: {0}")]
    Integrity(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) | Self::Config(_) => 2,
            Self::Solver(_) => 3,
            Self::Verification { .. } => 4,
            Self::Integrity(_) => 5,
            Self::Io(_) => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Verify,
    Sweep,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Solve => "solve",
            Self::Verify => "verify",
            Self::Sweep => "sweep",
            Self::Report => "report",
        }
    }
}

/// Loads the config and runs one command, returning the text printed on success.
pub fn run(cmd: Command, config_path: &Path, out: &Path) -> Result<String, RunError> {
    let cfg = RunConfig::load(config_path)?;
    fs::create_dir_all(out)?;
    match cmd {
        Command::Solve => cmd_solve(&cfg, out).map(|r| {
            format!(
                "converged: {} Newton iterations, residual {:.3e}, margins ({:.4}, {:.4})\n",
                r.newton_iterations, r.residual_sup, r.margin_a, r.margin_b
            )
        }),
        Command::Verify => cmd_verify(&cfg, out).map(|r| r.to_string()),
        Command::Sweep => cmd_sweep(&cfg, out).map(|rows| format!("{} sweep member(s) written to sweep.csv\n", rows.len())),
        Command::Report => cmd_report(&cfg, out),
    }
}

pub(crate) fn config_json(cfg: &RunConfig) -> serde_json::Value {
    serde_json::to_value(cfg).expect("config serializes")
}

/// `key = value` lines after `#` comment lines.
pub(crate) fn write_kv(path: &Path, header: &[String], pairs: &[(&str, String)]) -> Result<(), RunError> {
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    for h in header {
        writeln!(w, "# {h}")?;
    }
    for (k, v) in pairs {
        writeln!(w, "{k} = {v}")?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn read_kv(path: &Path) -> Result<BTreeMap<String, String>, RunError> {
    let text = fs::read_to_string(path)?;
    Ok(text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .filter_map(|l| l.split_once(" = "))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect())
}

pub(crate) fn kv<T: Display>(k: &'static str, v: T) -> (&'static str, String) {
    (k, v.to_string())
}

/// Shortest round-trip scientific notation.
pub(crate) fn kvf(k: &'static str, v: f64) -> (&'static str, String) {
    (k, format!("{v:e}"))
}

/// Parses a CSV with a header row into named numeric columns.
pub(crate) fn read_csv_columns(path: &Path) -> Result<BTreeMap<String, Vec<f64>>, RunError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .unwrap_or_default()
        .split(',')
        .map(str::to_string)
        .collect();
    let mut cols: BTreeMap<String, Vec<f64>> = header.iter().map(|h| (h.clone(), Vec::new())).collect();
    for line in lines {
        for (h, cell) in header.iter().zip(line.split(',')) {
            cols.get_mut(h).unwrap().push(cell.parse().unwrap_or(f64::NAN));
        }
    }
    Ok(cols)
}
