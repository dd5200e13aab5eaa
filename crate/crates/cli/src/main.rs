//! Command-line interface for partial-identification IV bounds: reduced-form
//! estimation, posterior set/parameter inference, manifold grid exports, and
//! oracle self-verification.

mod app;
mod commands;
mod config;
mod data;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{AnalysisConfig, Overrides};

#[derive(Parser)]
#[command(name = "ivbound", version, about = "Partial-identification bounds for IV models with mis-measured treatments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,

    /// Override the posterior draw count from the config.
    #[arg(long, global = true)]
    draws: Option<usize>,

    /// Override (or supply) the RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the credible-set coverage level.
    #[arg(long, global = true)]
    coverage: Option<f64>,

    /// Override the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Reduced-form point estimates, L, and binary alpha/psi bounds.
    Estimate { config: PathBuf },
    /// Posterior set-level and parameter-level inference.
    Infer { config: PathBuf },
    /// Identified-set surface grid at the posterior-mean covariance.
    Surface { config: PathBuf },
    /// Run the oracle cross-check suite.
    Verify {
        /// Test fixture: perturb the L scan to exercise failure reporting.
        #[arg(long, hide = true)]
        corrupt_l: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let overrides = Overrides {
        draws: cli.draws,
        seed: cli.seed,
        coverage: cli.coverage,
        out: cli.out,
    };
    let result = match cli.cmd {
        Cmd::Estimate { config } => {
            AnalysisConfig::load(&config, &overrides).and_then(|c| commands::estimate::run(&c))
        }
        Cmd::Infer { config } => {
            AnalysisConfig::load(&config, &overrides).and_then(|c| commands::infer::run(&c))
        }
        Cmd::Surface { config } => {
            AnalysisConfig::load(&config, &overrides).and_then(|c| commands::surface::run(&c))
        }
        Cmd::Verify { corrupt_l } => commands::verify::run(overrides.seed.unwrap_or(1), corrupt_l),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
