//! Command-line front end for the selective model-selection toolkit:
//! validate prediction pools, tune query scales against label budgets,
//! run seeded evaluation sweeps, and drive the numeric self-checks.
//!
//! Exit codes are stable across subcommands: 0 on success, 1 when a run
//! or a self-check fails, 2 for usage and input-validation errors.

use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod config;
mod run;
mod theory;
mod tune;
mod validate;

#[derive(Parser)]
#[command(
    name = "streampicker",
    version,
    about = "Online model selection with selective label queries"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a prediction-pool CSV and print its vital statistics.
    Validate(validate::ValidateArgs),
    /// Grid-search one strategy's query scale against a label budget.
    Tune(tune::TuneArgs),
    /// Evaluate strategies across budgets over seeded realizations.
    Run(run::RunArgs),
    /// Numeric self-checks: inequalities, oracle agreement, estimator bias.
    Theory(theory::TheoryArgs),
}

/// Restore the default SIGPIPE disposition so `streampicker ... | head`
/// ends quietly instead of panicking on the closed pipe.
fn reset_sigpipe() {
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
}

fn main() -> ExitCode {
    reset_sigpipe();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Validate(args) => validate::execute(&args),
        Command::Tune(args) => tune::execute(&args),
        Command::Run(args) => run::execute(&args),
        Command::Theory(args) => theory::execute(&args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
