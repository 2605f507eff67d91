use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rmtde_cli::{run, Command, RunOptions};

#[derive(Parser)]
#[command(name = "rmtde", version, about = "Deterministic equivalents for correlated MIMO multiple-access channels")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for CSV files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed; overrides `master_seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for Monte-Carlo trials.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Solve the fixed point at each `z_points` entry.
    Solve,
    /// Deterministic equivalent and Monte-Carlo mutual information over `snr_db`.
    SweepSnr,
    /// Mutual-information variance across fading laws and receive dimensions.
    VarianceVsCv,
    /// Iterative water-filling of the transmit covariances.
    OptimizeCovariance,
    /// Run the invariant suite.
    Validate,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match cli.command {
        Cmd::Solve => Command::Solve,
        Cmd::SweepSnr => Command::SweepSnr,
        Cmd::VarianceVsCv => Command::VarianceVsCv,
        Cmd::OptimizeCovariance => Command::OptimizeCovariance,
        Cmd::Validate => Command::Validate,
    };
    let opts = RunOptions {
        config: cli.config,
        out: cli.out,
        seed: cli.seed,
        threads: cli.threads,
    };
    match run(command, &opts) {
        Ok(report) => {
            for line in &report.summary {
                println!("{line}");
            }
            for file in &report.files {
                println!("wrote {}", file.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
