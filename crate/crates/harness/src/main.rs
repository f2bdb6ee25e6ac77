use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use minimax_harness::config::VariantConfig;
use minimax_harness::run::{run_config, Command, Overrides};

/// Minimax estimation for linear boundary value problems.
#[derive(Parser)]
#[command(name = "minimax", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Solve the estimation problem described by the config
    Solve(Flags),
    /// Run the filter on simulated data and compare with the estimator
    Filter(Flags),
    /// Solve a point-observation problem
    Point(Flags),
    /// Solve a second-order problem through the Riccati sweep
    Eliminate(Flags),
    /// Estimate a functional of the solution of an order-n problem
    Ordern(Flags),
    /// Estimate a functional of the right-hand side of an order-n problem
    Rhs(Flags),
    /// Compare the solver with the brute-force oracle
    Oracle(Flags),
    /// Monte Carlo with the saturating pair and random admissible draws
    Simulate(Flags),
    /// Run the invariant checks and print a pass/fail table
    Verify(Flags),
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    Squared,
    Linear,
}

#[derive(Args)]
struct Flags {
    #[arg(long)]
    config: PathBuf,
    /// Directory for CSV output
    #[arg(long)]
    out: Option<PathBuf>,
    /// Nodes per interval (oracle steps for `oracle`)
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Noise weighting of the elimination estimator
    #[arg(long, value_enum)]
    mode_variant: Option<Variant>,
    /// Also write gnuplot scripts next to the trajectory files
    #[arg(long)]
    plot: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 4 } else { 0 });
        }
    };
    let (cmd, flags) = match cli.command {
        Sub::Solve(f) => (Command::Solve, f),
        Sub::Filter(f) => (Command::Filter, f),
        Sub::Point(f) => (Command::Point, f),
        Sub::Eliminate(f) => (Command::Eliminate, f),
        Sub::Ordern(f) => (Command::Ordern, f),
        Sub::Rhs(f) => (Command::Rhs, f),
        Sub::Oracle(f) => (Command::Oracle, f),
        Sub::Simulate(f) => (Command::Simulate, f),
        Sub::Verify(f) => (Command::Verify, f),
    };
    let ov = Overrides {
        nodes: flags.nodes,
        seed: flags.seed,
        tol: flags.tol,
        samples: flags.samples,
        variant: flags.mode_variant.map(|v| match v {
            Variant::Squared => VariantConfig::Squared,
            Variant::Linear => VariantConfig::Linear,
        }),
        plot: flags.plot,
    };
    match run_config(cmd, &flags.config, flags.out.as_deref(), &ov) {
        Ok(outcome) => {
            print!("{}", outcome.text);
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
