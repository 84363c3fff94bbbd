//! `parasym`: reproducible experiment runner for the reflection-symmetry
//! laboratory. Exit codes: 0 = pass/complete, 2 = inconclusive verdict,
//! 1 = error.

mod commands;
mod config;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{Outcome, RunContext};

#[derive(Parser)]
#[command(
    name = "parasym",
    version,
    about = "Moving-plane symmetry experiments on discretized parabolic problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (strict TOML; unknown keys are errors).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for artifacts.
    #[arg(long, default_value = "parasym_out")]
    out: PathBuf,
    /// Seed override (otherwise the config's seed, default 0).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for experiment matrices.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve one trajectory and record its functional series.
    Simulate(RunArgs),
    /// Evaluate the moving-plane functional of a stored snapshot.
    Lambda {
        /// Snapshot file written by `simulate` or `equilibria`.
        snapshot: PathBuf,
        /// Relative tolerance of the scan.
        #[arg(long, default_value_t = 1e-9)]
        tol_rel: f64,
        /// Optional directory for a one-row lambda.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Multi-start steady-state sweep with classification.
    Equilibria(RunArgs),
    /// Check the asymptotic limit-set dichotomy over a run matrix.
    Theorem1(RunArgs),
    /// Construct orbits from a nodal steady state and assign their cases.
    Theorem2(RunArgs),
    /// Grid and time-step refinement study on the exact decay profile.
    Convergence(RunArgs),
    /// Render a CSV column as an SVG line plot.
    Plot {
        /// CSV file (first column is the abscissa).
        csv: PathBuf,
        /// Column to plot (default: the second column).
        #[arg(long)]
        y: Option<String>,
        /// Output directory (default: next to the CSV).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn dispatch(cli: Cli) -> anyhow::Result<Outcome> {
    match cli.command {
        Command::Simulate(args) => {
            let ctx = RunContext::new(&args.config, args.out, args.seed, args.jobs)?;
            commands::simulate(&ctx)
        }
        Command::Lambda {
            snapshot,
            tol_rel,
            out,
        } => commands::lambda(&snapshot, tol_rel, out.as_deref()),
        Command::Equilibria(args) => {
            let ctx = RunContext::new(&args.config, args.out, args.seed, args.jobs)?;
            commands::equilibria(&ctx)
        }
        Command::Theorem1(args) => {
            let ctx = RunContext::new(&args.config, args.out, args.seed, args.jobs)?;
            commands::theorem1(&ctx)
        }
        Command::Theorem2(args) => {
            let ctx = RunContext::new(&args.config, args.out, args.seed, args.jobs)?;
            commands::theorem2(&ctx)
        }
        Command::Convergence(args) => {
            let ctx = RunContext::new(&args.config, args.out, args.seed, args.jobs)?;
            commands::convergence(&ctx)
        }
        Command::Plot { csv, y, out } => {
            commands::plot_csv(&csv, y.as_deref(), out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(outcome) => ExitCode::from(outcome.exit_code()),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
