//! `pdpp`: envelope checks, predictions, symmetry tables, sampling and CLT
//! studies for planar determinantal point processes.
//!
//! Exit status: 0 success, 1 a scientific check failed, 2 usage or
//! configuration error, 3 numerical failure.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{parse_config, validate_rho, RunConfig};
use crate::error::CliError;
use crate::output::OutputDir;

#[derive(Parser, Debug)]
#[command(name = "pdpp", version, about = "Fluctuations of linear statistics of planar DPPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Configuration file (sections [kernel], [test_function], [study], [sampler], [output]).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides [output] dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed; overrides [study] seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads, 0 for one per core.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Comma-separated rho schedule; overrides [study] rho.
    #[arg(long, global = true, value_delimiter = ',')]
    rho: Option<Vec<f64>>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Check the envelope axioms and domination for the kernel.
    CheckEnvelope,
    /// Limits, quadrature expectation and variance, and C3 per rho.
    Predict,
    /// Exact composition sums and finite-difference symmetry checks.
    Symmetry,
    /// Sample configurations on the window.
    Sample,
    /// Monte Carlo CLT study along the rho schedule.
    Clt,
    /// Variance growth study for a scaled Ginibre kernel.
    Nonreproducing,
}

fn load(cli: &Cli) -> Result<RunConfig, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage("--config <path> is required".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let mut config = parse_config(&text)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(rho) = &cli.rho {
        validate_rho(rho).map_err(|m| CliError::Usage(format!("--rho: {m}")))?;
        config.rho = rho.clone();
    }
    if let Some(out) = &cli.out {
        config.out_dir = out.display().to_string();
    }
    Ok(config)
}

fn run(cli: &Cli, config: &RunConfig, out: &OutputDir) -> Result<bool, CliError> {
    match cli.command {
        Command::CheckEnvelope => commands::check_envelope(config, out),
        Command::Predict => commands::predict(config, out),
        Command::Symmetry => commands::symmetry(config, out),
        Command::Sample => commands::sample(config, out),
        Command::Clt => commands::clt(config, out),
        Command::Nonreproducing => commands::nonreproducing(config, out),
    }
}

fn write_error(dir: Option<&PathBuf>, e: &CliError) {
    eprintln!("pdpp: {e}");
    let Some(dir) = dir else { return };
    let Ok(out) = OutputDir::create(dir) else { return };
    if let Ok(mut text) = serde_json::to_string_pretty(&e.report()) {
        text.push('\n');
        let _ = out.write_atomic("error.json", text.as_bytes());
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build_global() {
        eprintln!("pdpp: cannot configure workers: {e}");
        return ExitCode::from(2);
    }
    let config = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            write_error(cli.out.as_ref(), &e);
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let dir = PathBuf::from(&config.out_dir);
    let result = OutputDir::create(&dir)
        .map_err(CliError::from)
        .and_then(|out| run(&cli, &config, &out));
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("pdpp: check failed; see {}", dir.join("report.json").display());
            ExitCode::from(1)
        }
        Err(e) => {
            write_error(Some(&dir), &e);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
