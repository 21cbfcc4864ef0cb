//! `cdc`: runs the shared-indexation and collective-drawdown experiments and
//! writes plot-ready CSV.

mod checkpoint;
mod commands;
mod config;
mod output;
mod validate;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use commands::Run;
use config::Config;

#[derive(Debug, Parser)]
#[command(name = "cdc", version, about = "Collective pension scheme simulations")]
struct Cli {
    /// JSON configuration; defaults are used for missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = "CDC_THREADS")]
    threads: Option<usize>,
    /// Network checkpoint; defaults to OUT/checkpoint.json.
    #[arg(long, global = true)]
    checkpoint: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate the shared-indexation scheme.
    SimulateSi,
    /// Train the collective-drawdown policy and write a checkpoint.
    TrainCd,
    /// Evaluate a trained policy in the infinite fund.
    SimulateCd,
    /// Simulate finite cohorts and overlay the infinite fund.
    SimulateFinite {
        /// Also write full paths for this many scenarios.
        #[arg(long, default_value_t = 0)]
        detail: usize,
    },
    /// Compare shared-indexation and collective-drawdown decile files.
    Compare {
        #[arg(long)]
        si: PathBuf,
        #[arg(long)]
        cd: PathBuf,
    },
    /// Run the oracle checks.
    Validate {
        /// Expected Merton risky share (defaults to the closed form).
        #[arg(long)]
        merton_target: Option<f64>,
        /// Run only these checks.
        #[arg(long = "check", value_parser = clap::builder::PossibleValuesParser::new(validate::CHECKS))]
        checks: Vec<String>,
    },
}

fn execute(cli: Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let mut config = Config::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        config.override_seed(seed);
    }
    config.validate()?;
    let run = Run {
        config,
        out: cli.out,
        checkpoint: cli.checkpoint,
    };
    match cli.command {
        Command::SimulateSi => commands::simulate_si(&run)?,
        Command::TrainCd => commands::train_cd(&run)?,
        Command::SimulateCd => commands::simulate_cd(&run)?,
        Command::SimulateFinite { detail } => commands::simulate_finite_cmd(&run, detail)?,
        Command::Compare { si, cd } => commands::compare(&run, &si, &cd)?,
        Command::Validate { merton_target, checks } => {
            let opts = validate::Options {
                merton_target,
                only: checks,
            };
            let results = validate::run(&run.config, &opts)?;
            let mut ok = true;
            for r in &results {
                println!("{} {}: {}", if r.pass { "PASS" } else { "FAIL" }, r.name, r.detail);
                ok &= r.pass;
            }
            return Ok(ok);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
