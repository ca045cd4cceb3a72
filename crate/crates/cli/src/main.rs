mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{parse_config, Command};
use run::CliError;

/// Bayesian and minimax solvers for the Poissonian two-armed bandit.
#[derive(Parser)]
#[command(name = "poisson-bandit", version)]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Subcommand)]
enum CliCommand {
    /// Backward-induction solve: risk and strategy tables plus summary.
    Solve(ConfigArg),
    /// First-order small-step solve with a residual audit.
    Linearized(ConfigArg),
    /// Exact regret of the Bayesian strategy per parameter point.
    Evaluate(ConfigArg),
    /// Monte Carlo regret of the Bayesian strategy.
    Simulate(ConfigArg),
    /// Worst-case prior search on a parameter grid.
    Minimax(ConfigArg),
    /// Cross-check the two recursions against each other.
    Audit(ConfigArg),
}

#[derive(clap::Args)]
struct ConfigArg {
    /// Path to the key = value run configuration.
    #[arg(long)]
    config: PathBuf,
}

fn execute() -> Result<(), CliError> {
    let cli = Cli::parse();
    let (expected, arg) = match &cli.command {
        CliCommand::Solve(a) => (Command::Solve, a),
        CliCommand::Linearized(a) => (Command::Linearized, a),
        CliCommand::Evaluate(a) => (Command::Evaluate, a),
        CliCommand::Simulate(a) => (Command::Simulate, a),
        CliCommand::Minimax(a) => (Command::Minimax, a),
        CliCommand::Audit(a) => (Command::Audit, a),
    };
    let text = std::fs::read_to_string(&arg.config)
        .map_err(|e| CliError::Io(format!("{}: {e}", arg.config.display())))?;
    let run_config = parse_config(&text).map_err(|e| CliError::Validation(e.to_string()))?;
    if run_config.command != expected {
        return Err(CliError::Validation(format!(
            "config declares command `{}` but `{}` was invoked",
            run_config.command.as_str(),
            expected.as_str()
        )));
    }
    run::run(&run_config)?;
    Ok(())
}

fn main() -> ExitCode {
    match execute() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::FAILURE
        }
    }
}
