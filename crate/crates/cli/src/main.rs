use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use riscov_cli::config::{preset, ExperimentConfig};
use riscov_cli::run::{run, Command};
use riscov_cli::{CliError, Result};

#[derive(Parser)]
#[command(name = "riscov", version, about = "Coverage of RIS-assisted mmWave sensing and communication networks")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Monte Carlo coverage and rate pair at every configured threshold.
    Simulate(Common),
    /// Numerical evaluation of the coverage expressions.
    Analyze(Common),
    /// Runs the configured mode over every point of the `[sweep]` table.
    Sweep(Common),
    /// Distance-law, association and coverage checks against Monte Carlo.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration (a run manifest is accepted too).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration: defaults, distances, equal-energy, coverage-grid.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Monte Carlo drops per scenario point.
    #[arg(long)]
    trials: Option<u64>,
    /// Worker threads; 0 lets the runtime decide.
    #[arg(long, env = "RISCOV_THREADS")]
    threads: Option<usize>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(name)) => preset(name)?,
            (None, None) => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(trials) = self.trials {
            cfg.trials = trials;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn execute(cli: Cli) -> Result<()> {
    let (command, common) = match cli.command {
        Cmd::Simulate(c) => (Command::Simulate, c),
        Cmd::Analyze(c) => (Command::Analyze, c),
        Cmd::Sweep(c) => (Command::Sweep, c),
        Cmd::Validate(c) => (Command::Validate, c),
    };
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config {
                field: "threads".into(),
                reason: e.to_string(),
            })?;
    }
    let cfg = common.config()?;
    let artifacts = run(command, &cfg, &mut |line| println!("{line}"))?;
    for path in &artifacts {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
