use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fracground::cli::{self, Command, Overrides};

/// Ground states of the nonlinear fractional Schrödinger equation on a
/// periodic box, with verification of the variational identities.
#[derive(Debug, Parser)]
#[command(name = "fracground", version)]
struct Cli {
    /// Path to the TOML config (optional for `benchmark`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (default: config `out_dir`, then $FRACGROUND_OUT,
    /// then ./fracground_out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for sweeps and multistart runs (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Debug, Subcommand)]
enum CliCommand {
    /// Compute a ground state by Nehari-constrained descent.
    Solve,
    /// Compute a positive ground state (positive-part nonlinearity).
    SolvePositive,
    /// Levels of the shifted-potential family V + delta.
    SweepPotential,
    /// Levels of the parametric family V(eps x) against V = Vinf.
    SweepEps,
    /// Run the identity/inequality verification suite.
    Verify,
    /// Evolve the computed ground state under the time-dependent equation.
    Evolve,
    /// End-to-end exact-solution benchmark with built-in defaults.
    Benchmark,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match cli.command {
        CliCommand::Solve => Command::Solve,
        CliCommand::SolvePositive => Command::SolvePositive,
        CliCommand::SweepPotential => Command::SweepPotential,
        CliCommand::SweepEps => Command::SweepEps,
        CliCommand::Verify => Command::Verify,
        CliCommand::Evolve => Command::Evolve,
        CliCommand::Benchmark => Command::Benchmark,
    };
    let overrides = Overrides { out_dir: cli.out, jobs: cli.jobs, seed: cli.seed };
    let code = cli::run(command, cli.config.as_deref(), &overrides);
    ExitCode::from(code as u8)
}
