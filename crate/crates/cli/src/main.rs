//! `sparsereg`: fit, select, evaluate and simulate sparse miRNA-mRNA regressions.
//!
//! Exit status is 0 on success, 2 for usage or input errors and 3 for
//! numerical failures.

mod commands;
mod error;
mod io;
mod manifest;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "sparsereg", version, about = "Sparse regression for miRNA-mRNA down-regulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a point estimator or sample a Bayesian posterior for every gene.
    Fit(commands::FitArgs),
    /// Active credible interval selection from posterior chains.
    Select(commands::SelectArgs),
    /// ROC, partial AUC and validated-hit counts against validated pairs.
    Evaluate(commands::EvaluateArgs),
    /// Write a synthetic dataset with planted interactions.
    Simulate(commands::SimulateArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::Select(a) => commands::select(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Simulate(a) => commands::simulate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
