//! `qrmlab`: runs quantile-risk experiments from a config file and plots their CSV output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod fixtures;
mod plot;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use config::{input_error, ExperimentConfig, InputError};
use plot::PlotKind;
use qrm_core::semlab::VerifyOptions;
use qrm_core::QrmError;

#[derive(Parser)]
#[command(name = "qrmlab", version, about = "Quantile risk minimization experiments")]
struct Cli {
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for experiment cells.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a TOML config or a previous run's manifest.csv.
    Run {
        config: PathBuf,
        /// Output directory; overrides the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a CSV table as an SVG plot.
    Plot {
        csv: PathBuf,
        #[arg(long, value_enum)]
        kind: PlotKind,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check whether a domain set has a unique invariant minimizer.
    Verify {
        /// Built-in fixture name or a TOML file with [[domains]] entries.
        fixture: String,
    },
}

/// Where a run writes: `--out`, else the config's `out_dir`, else a directory
/// named after the kind. A manifest re-runs into its own directory.
fn output_dir(config_path: &Path, cfg: &ExperimentConfig, flag: Option<PathBuf>) -> PathBuf {
    if let Some(dir) = flag {
        return dir;
    }
    let base = config_path.parent().unwrap_or(Path::new("."));
    if config_path.extension().is_some_and(|e| e == "csv") {
        return base.to_path_buf();
    }
    base.join(cfg.out_dir.clone().unwrap_or_else(|| cfg.kind.name().to_string()))
}

fn run_command(path: &Path, out: Option<PathBuf>, seed: Option<u64>) -> Result<()> {
    let mut cfg = ExperimentConfig::load(path)?;
    if seed.is_some() {
        cfg.seed = seed;
    }
    let cfg = cfg.resolve()?;
    let dir = output_dir(path, &cfg, out);
    let mut outputs = run::Outputs::create(&dir)?;
    match run::run(&cfg, &mut outputs) {
        Ok(()) => {
            println!("{}: wrote {} files to {}", cfg.kind.name(), outputs.files().len(), outputs.dir().display());
            Ok(())
        }
        Err(e) => {
            outputs.discard();
            Err(e)
        }
    }
}

fn verify_command(fixture: &str, seed: Option<u64>) -> Result<()> {
    let moments = fixtures::load(fixture)?;
    let opts = VerifyOptions { seed: seed.unwrap_or_default(), ..VerifyOptions::default() };
    for (k, v) in run::verify_lines(&moments, opts)? {
        println!("{k}: {v}");
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return input_error("--jobs must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global().context("starting worker pool")?;
    }
    match cli.command {
        Command::Run { config, out } => run_command(&config, out, cli.seed),
        Command::Plot { csv, kind, out } => plot::plot_file(&csv, kind, &out),
        Command::Verify { fixture } => verify_command(&fixture, cli.seed),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<InputError>().is_some() {
        2
    } else if matches!(err.downcast_ref::<QrmError>(), Some(QrmError::Divergence { .. })) {
        3
    } else {
        1
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
