use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sps_core::cli::{self, Command, Invocation};

/// Ground states, identity checks and scaling experiments for the
/// semi-relativistic Schrödinger–Poisson–Slater energy.
#[derive(Debug, Parser)]
#[command(name = "sps", version)]
struct Args {
    #[command(subcommand)]
    command: Sub,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Concurrent starts.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Overrides the config `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Energy breakdown of a stored field.
    Energy {
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
    /// Ground state at one mass, best over the configured starts.
    Minimize,
    /// Sweep of I(rho)/rho over `rhos` with warm starts.
    Curve,
    /// Lower bound for the best constant and threshold verdicts.
    BestConstant,
    /// Blow-up and blow-down dilation tables.
    Scaling,
    /// Identity residuals of a stored field; exit 5 above tolerance.
    Verify {
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let (command, snapshot) = match args.command {
        Sub::Energy { snapshot } => (Command::Energy, snapshot),
        Sub::Minimize => (Command::Minimize, None),
        Sub::Curve => (Command::Curve, None),
        Sub::BestConstant => (Command::BestConstant, None),
        Sub::Scaling => (Command::Scaling, None),
        Sub::Verify { snapshot } => (Command::Verify, snapshot),
    };
    let inv = Invocation {
        command,
        config: args.config,
        out: args.out,
        workers: args.workers,
        seed: args.seed,
        snapshot,
    };
    match cli::run(&inv) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            for f in &outcome.files {
                eprintln!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
