//! Config-driven front end: dataset preparation, model training, black-box
//! attack execution, and trace reporting.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{AttackArgs, PrepareArgs, ReportArgs, TrainArgs};

#[derive(Parser)]
#[command(
    name = "loss01",
    version,
    about = "01-loss classifiers, convex baselines, and substitute-model black-box attacks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert raw MNIST/CIFAR-10 files (or existing containers) into
    /// two-class BDS1 containers.
    Prepare(PrepareArgs),
    /// Train a model (optionally a vote ensemble) and persist it.
    Train(TrainArgs),
    /// Run a substitute-model black-box attack against a stored model.
    Attack(AttackArgs),
    /// Merge attack traces into aligned per-epoch series plus a summary.
    Report(ReportArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Prepare(args) => commands::prepare(args),
        Command::Train(args) => commands::train(args),
        Command::Attack(args) => commands::attack(args),
        Command::Report(args) => commands::report(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            // single machine-parseable line: "error: <chain>"
            let chain: Vec<String> = err.chain().map(|c| c.to_string()).collect();
            eprintln!("error: {}", chain.join(": "));
            ExitCode::FAILURE
        }
    }
}
