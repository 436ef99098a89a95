//! `eyeshift` command-line tool: fit, redirect, synthesize, self-test.

mod config;
mod error;
mod files;
mod fit;
mod redirect;
mod selftest;
mod synth;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use eyeshift::testkit::generate::{generate_asset, SyntheticModelSpec};

use crate::config::RunConfig;
use crate::error::CliError;

/// Overrides the worker thread count.
const THREADS_VAR: &str = "EYESHIFT_THREADS";

#[derive(Parser)]
#[command(name = "eyeshift", version, about = "Eye-region model fitting and gaze redirection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the model to every frame.
    Fit {
        #[arg(long)]
        config: PathBuf,
    },
    /// Redirect fitted frames towards scripted gaze targets.
    Redirect {
        #[arg(long)]
        config: PathBuf,
        /// Gaze-target script, one `frame x y z` line per frame.
        #[arg(long)]
        targets: PathBuf,
    },
    /// Render synthetic frames, landmarks and ground-truth parameters.
    Synth {
        #[arg(long)]
        config: PathBuf,
        /// Gaze sweep in degrees: pitch_min,pitch_max,yaw_min,yaw_max,step.
        #[arg(long, conflicts_with = "phi")]
        grid: Option<String>,
        /// Parameter records to render instead of a sweep.
        #[arg(long)]
        phi: Option<PathBuf>,
    },
    /// Check the asset and renderer against brute-force oracles.
    Selftest {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write a seeded synthetic model asset.
    MakeAsset {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 512)]
        texture_size: usize,
    },
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = value
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::input(format!("{THREADS_VAR}=`{value}` is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::input(format!("cannot start {threads} threads: {e}")))
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    configure_threads()?;
    match cli.command {
        Command::Fit { config } => fit::run(&RunConfig::load(&config)?)?,
        Command::Redirect { config, targets } => redirect::run(&RunConfig::load(&config)?, &targets)?,
        Command::Synth { config, grid, phi } => {
            let config = RunConfig::load(&config)?;
            let source = match (grid, &phi) {
                (Some(grid), _) => synth::Source::Grid(synth::Grid::parse(&grid)?),
                (None, Some(path)) => synth::Source::Records(path),
                (None, None) => return Err(CliError::input("synth needs --grid or --phi")),
            };
            synth::run(&config, &source)?;
        }
        Command::Selftest { config } => {
            if !selftest::run(&RunConfig::load(&config)?)? {
                return Ok(ExitCode::from(2));
            }
        }
        Command::MakeAsset { out, seed, texture_size } => {
            let spec = SyntheticModelSpec {
                seed,
                texture_size,
                ..SyntheticModelSpec::default()
            };
            generate_asset(&spec)?.save(&out)?;
            log::info!("wrote asset to {}", out.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            log::error!("{e}");
            e.exit_code()
        }
    }
}
