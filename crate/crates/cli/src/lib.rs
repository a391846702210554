//! Batch front-end: JSON job files in, CSV tables and a JSON summary out.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod jobs;
pub mod output;

use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

pub use config::{Command, JobConfig};
pub use jobs::{Cell, Check, JobOutput, Table};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INCONSISTENT: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub command: Command,
    pub config: PathBuf,
    pub threads: usize,
    pub out: Option<PathBuf>,
    /// Record zero wall times so that repeated runs give identical files.
    pub fixed_timing: bool,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub exit_code: i32,
    pub csv: PathBuf,
    pub summary: PathBuf,
    pub output: JobOutput,
}

/// Parse, validate and run a job, then write `<command>.csv` and `summary.json`.
pub fn run(opts: &RunOptions, env: impl IntoIterator<Item = (String, String)>) -> Result<RunReport, CliError> {
    let start = Instant::now();
    let text =
        std::fs::read_to_string(&opts.config).map_err(|e| CliError::Io(format!("{}: {e}", opts.config.display())))?;
    let mut cfg = JobConfig::from_json(&text)?;
    cfg.tolerances.apply_env(env)?;
    cfg.validate(opts.command)?;
    if opts.threads == 0 {
        return Err(CliError::Config("--threads must be at least 1".into()));
    }
    let base = opts.config.parent().unwrap_or(Path::new(".")).to_path_buf();
    let out_dir = match (&opts.out, &cfg.output) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => base.join(o),
        (None, None) => PathBuf::from("."),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let ctx = jobs::Context { config: &cfg, base: &base, fixed_timing: opts.fixed_timing };
    let result = pool.install(|| jobs::run(opts.command, &ctx))?;
    let passed = result.checks.iter().all(|c| c.passed);
    let exit_code = if passed { EXIT_OK } else { EXIT_INCONSISTENT };
    std::fs::create_dir_all(&out_dir).map_err(|e| CliError::Io(format!("{}: {e}", out_dir.display())))?;
    let csv = out_dir.join(format!("{}.csv", opts.command.name()));
    output::write_csv(&csv, &result.table)?;
    let summary = out_dir.join("summary.json");
    let wall = if opts.fixed_timing { 0.0 } else { start.elapsed().as_secs_f64() * 1e3 };
    output::write_summary(&summary, opts, &cfg, &result, exit_code, wall)?;
    Ok(RunReport { exit_code, csv, summary, output: result })
}
