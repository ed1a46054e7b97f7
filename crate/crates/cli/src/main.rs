//! `plumetrace` command-line interface.

mod cache;
mod commands;
mod config;
mod error;
mod io;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Globals;
use config::{Overrides, StatChoice};
use error::{CliError, Result};

#[derive(Parser, Debug)]
#[command(
    name = "plumetrace",
    version,
    about = "Epidemic change detection along plume transects"
)]
struct Cli {
    /// Run configuration JSON (a simulation design for `simulate`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    stat: Option<StatChoice>,
    #[arg(long, global = true)]
    beta: Option<f64>,
    #[arg(long, global = true)]
    alpha_level: Option<f64>,
    #[arg(long, global = true)]
    reps: Option<usize>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Emit the signal without errors (`simulate`).
    #[arg(long, global = true)]
    noiseless: bool,
    /// Regenerate cached null tables that disagree with the run.
    #[arg(long, global = true)]
    regen: bool,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Generate a synthetic dataset with its truth.
    Simulate,
    /// Estimate the source and write surfaces, heatmaps and a report.
    Estimate,
    /// Test for a change and report p-values.
    Test,
    /// Simulate null tables and store them in the cache.
    Critvals,
    /// Write heatmap CSV and SVG files only.
    Heatmap,
}

fn run(cli: Cli) -> Result<()> {
    let threads = cli.threads;
    if threads == Some(0) {
        return Err(CliError::Usage("threads must be positive".into()));
    }
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let g = Globals {
        config: cli.config,
        overrides: Overrides {
            seed: cli.seed,
            stat: cli.stat,
            beta: cli.beta,
            alpha_level: cli.alpha_level,
            reps: cli.reps,
            threads,
            out: cli.out,
        },
        noiseless: cli.noiseless,
        regen: cli.regen,
    };
    match cli.command {
        Command::Simulate => commands::simulate(&g),
        Command::Estimate => commands::estimate(&g),
        Command::Test => commands::test(&g),
        Command::Critvals => commands::critvals(&g),
        Command::Heatmap => commands::heatmap(&g),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
