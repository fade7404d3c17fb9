use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use roibandit::cli;

/// Primal-dual auction-bidding simulator with hard budget and soft ROI
/// constraints.
#[derive(Parser)]
#[command(name = "roibandit", version, about)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the configured experiment: one trace and summary per seed.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Run only this seed instead of the configured list.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (overrides the config's out_dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for multi-seed execution.
        #[arg(long, default_value_t = default_jobs())]
        jobs: usize,
    },
    /// Solve the offline LP baseline and feasibility margins.
    Baseline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Audit a recorded trace against the configured bounds.
    Audit {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Horizon-scaling study over the [sweep] section.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = default_jobs())]
        jobs: usize,
    },
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("ROIBANDIT_LOG")).init();
    let args = Args::parse();
    let result = match args.command {
        Command::Run { config, seed, out, jobs } => {
            cli::cmd_run(&config, out.as_deref(), seed, jobs).map(|outcome| {
                if outcome.budget_ok_all {
                    ExitCode::SUCCESS
                } else {
                    eprintln!("error: the hard budget invariant failed on at least one run");
                    ExitCode::from(1)
                }
            })
        }
        Command::Baseline { config, out } => {
            cli::cmd_baseline(&config, out.as_deref()).map(|_| ExitCode::SUCCESS)
        }
        Command::Audit { trace, config, out } => {
            cli::cmd_audit(&trace, &config, out.as_deref()).map(|outcome| {
                if outcome.hard_ok {
                    ExitCode::SUCCESS
                } else {
                    eprintln!("error: a hard audit check failed");
                    ExitCode::from(2)
                }
            })
        }
        Command::Sweep { config, out, jobs } => {
            cli::cmd_sweep(&config, out.as_deref(), jobs).map(|outcome| {
                if outcome.budget_ok_all {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(1)
                }
            })
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
