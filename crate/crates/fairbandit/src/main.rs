use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fairbandit::harness::{self, ExperimentConfig};
use fairbandit::Error;

#[derive(Parser)]
#[command(
    name = "fairbandit",
    version,
    about = "Runs seeded fairness-constrained bandit experiments from a config file"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute every seed in the config and write per-round CSV plus summary JSON
    Run {
        /// Experiment config (TOML)
        config: PathBuf,
        /// Write artifacts here instead of the config's output_dir
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Comma-separated seeds replacing the config's list
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Worker threads for parallel seeds (default: one per core)
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Check a config against every invariant without running it
    Validate {
        /// Experiment config (TOML)
        config: PathBuf,
    },
}

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

fn load(path: &PathBuf) -> Result<ExperimentConfig, (u8, String)> {
    harness::load_config(path).map_err(|e| (EXIT_CONFIG, e.to_string()))
}

fn checked(cfg: &ExperimentConfig) -> Result<(), (u8, String)> {
    let diags = harness::validate(cfg);
    if diags.is_empty() {
        Ok(())
    } else {
        let lines: Vec<String> = diags.iter().map(|d| d.to_string()).collect();
        Err((EXIT_CONFIG, lines.join("\n")))
    }
}

fn dispatch() -> Result<(), (u8, String)> {
    match Cli::parse().command {
        Command::Run {
            config,
            output_dir,
            seeds,
            jobs,
        } => {
            let mut cfg = load(&config)?;
            if let Some(dir) = output_dir {
                cfg.output_dir = dir;
            }
            if let Some(seeds) = seeds {
                cfg.seeds = seeds;
            }
            checked(&cfg)?;
            harness::run_experiment(&cfg, jobs).map_err(|e| match e {
                Error::Config(_) => (EXIT_CONFIG, e.to_string()),
                other => (EXIT_RUNTIME, other.to_string()),
            })?;
            println!(
                "wrote {} seed(s) to {}",
                cfg.seeds.len(),
                cfg.output_dir.display()
            );
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = load(&config)?;
            checked(&cfg)?;
            println!("ok");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
