//! `crmb`: run, measure and generate corruption-robust RL experiments.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use crmb_core::harness::config::ExperimentConfig;
use crmb_core::harness::measure::{generate_instance_files, measure_and_write};
use crmb_core::harness::run_and_write;
use crmb_core::Error;

#[derive(Parser)]
#[command(name = "crmb", version, about = "Corruption-robust model-based RL experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (seed, algorithm) cell and write CSV/JSON outputs.
    Run {
        #[command(flatten)]
        common: Common,
        /// Worker threads.
        #[arg(long, env = "CRMB_JOBS", default_value_t = 1)]
        jobs: usize,
        /// Search all deterministic policies in the offline max-min step.
        #[arg(long)]
        exhaustive_policies: bool,
    },
    /// Estimate eluder dimension, coverage and information coefficients.
    Measure {
        #[command(flatten)]
        common: Common,
    },
    /// Write the instance, model class and (offline) dataset of the first seed.
    GenInstance {
        #[command(flatten)]
        common: Common,
    },
    /// Parse and check a config without running it.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `experiment.output_dir`.
    #[arg(long, env = "CRMB_OUT_DIR")]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<(ExperimentConfig, PathBuf), Error> {
        let cfg = ExperimentConfig::from_path(&self.config)?;
        let out = self.out.clone().unwrap_or_else(|| cfg.experiment.output_dir.clone());
        Ok((cfg, out))
    }
}

fn print_paths(paths: &[PathBuf]) {
    for p in paths {
        println!("{}", p.display());
    }
}

fn execute(command: Command) -> Result<(), Error> {
    match command {
        Command::Run {
            common,
            jobs,
            exhaustive_policies,
        } => {
            if jobs == 0 {
                return Err(Error::Config("--jobs must be at least 1".into()));
            }
            let (cfg, out) = common.load()?;
            print_paths(&run_and_write(&cfg, &out, jobs, exhaustive_policies)?);
        }
        Command::Measure { common } => {
            let (cfg, out) = common.load()?;
            print_paths(&[measure_and_write(&cfg, &out)?]);
        }
        Command::GenInstance { common } => {
            let (cfg, out) = common.load()?;
            print_paths(&generate_instance_files(&cfg, &out)?);
        }
        Command::ValidateConfig { config } => {
            let cfg = ExperimentConfig::from_path(Path::new(&config))?;
            println!(
                "{}: ok ({} seeds, {} algorithms)",
                config.display(),
                cfg.seeds().len(),
                cfg.algorithms.len()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Config(_)) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
