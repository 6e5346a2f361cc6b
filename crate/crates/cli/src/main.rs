//! Experiment runner for the sincint library.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use sincint_cli::config::{ExperimentConfig, ExperimentKind};
use sincint_cli::experiments;

#[derive(Parser)]
#[command(
    name = "sincint",
    version,
    about = "Reproducible experiments on random series over Poisson and renewal arrivals"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a config file and write CSV results.
    Run {
        /// Path to the experiment config (key = value text with sections).
        #[arg(long)]
        config: PathBuf,
        /// Override the master seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for replicate-parallel stages (0 = default pool).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Parse a config, report every field and defaulted knob; no side effects.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// List the available experiment kinds.
    ListExperiments,
}

fn load_config(
    path: &PathBuf,
    seed: Option<u64>,
    out: Option<PathBuf>,
    workers: Option<usize>,
) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(out) = out {
        cfg.out_dir = out;
    }
    if let Some(workers) = workers {
        cfg.workers = workers;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, seed, out, workers } => {
            load_config(&config, seed, out, workers).and_then(|cfg| {
                let result = experiments::run(&cfg)?;
                println!(
                    "{}: done in {:.2}s (sincint v{})",
                    result.kind.name(),
                    result.wall.as_secs_f64(),
                    sincint::VERSION
                );
                Ok(())
            })
        }
        Command::Validate { config } => load_config(&config, None, None, None).map(|cfg| {
            println!("config ok: kind={} seed={} replicates={}", cfg.kind, cfg.seed, cfg.replicates);
            println!("canonical form:");
            print!("{}", cfg.canonical());
            if cfg.defaulted.is_empty() {
                println!("no defaulted knobs");
            } else {
                for d in &cfg.defaulted {
                    println!("defaulted: {d}");
                }
            }
            println!("config hash: 0x{:016x}", cfg.config_hash());
        }),
        Command::ListExperiments => {
            for kind in ExperimentKind::ALL {
                println!("{:<14} {}", kind.name(), kind.describe());
            }
            Ok(())
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
