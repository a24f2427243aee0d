//! `fdsb`: run, sweep and validate full-duplex self-backhaul simulations.

mod config;
mod oracle;
mod output;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "fdsb", version, about = "Full-duplex self-backhaul small-cell simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single experiment config over its seeds.
    Run {
        config: PathBuf,
        /// Replace the config's seed list with this one seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Record per-slot traces in the result files.
        #[arg(long)]
        trace: bool,
        /// Worker threads for independent runs.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Run a sweep spec (d1 or d2 values crossed with baselines and
    /// traffic modes). Interrupted sweeps resume from completed runs.
    Sweep {
        spec: PathBuf,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Check a run or sweep config without executing it.
    Validate { path: PathBuf },
    /// Compare the power solver against the brute-force grid oracle.
    Oracle {
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 20)]
        grid_points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.98)]
        threshold: f64,
    },
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Run {
            config,
            seed,
            out_dir,
            trace,
            jobs,
        } => {
            let mut sim = config::load_run_config(&config)?;
            if let Some(seed) = seed {
                sim.seeds = vec![seed];
            }
            sim.engine.record_trace |= trace;
            sweep::run_single(&sim, &out_dir, jobs)
        }
        Command::Sweep { spec, out_dir, jobs } => {
            let file = config::load_sweep_file(&spec)?;
            sweep::run_sweep(&file, &out_dir, jobs)
        }
        Command::Validate { path } => {
            let text = std::fs::read_to_string(&path)?;
            let value: toml::Value = toml::from_str(&text)?;
            if value.get("sweep").is_some() {
                config::load_sweep_file(&path)?;
                println!("OK: sweep config {}", path.display());
            } else {
                config::load_run_config(&path)?;
                println!("OK: run config {}", path.display());
            }
            Ok(())
        }
        Command::Oracle {
            instances,
            grid_points,
            seed,
            threshold,
        } => {
            let report = oracle::run_oracle(instances, grid_points, seed, threshold)?;
            if report.below_threshold > 0 {
                anyhow::bail!(
                    "{} of {} instances below ratio {}",
                    report.below_threshold,
                    report.instances,
                    threshold
                );
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": format!("{e:#}") }));
            ExitCode::FAILURE
        }
    }
}
