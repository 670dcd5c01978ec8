//! The validate subcommand: ingest a prediction pool and print its
//! shape, per-model accuracies, and disagreement fraction.

use std::path::PathBuf;
use std::process::ExitCode;

use streampicker_core::{PredictionPool, Result};

#[derive(clap::Args)]
pub struct ValidateArgs {
    /// Prediction-pool CSV to check.
    pub pool: PathBuf,
}

pub fn execute(args: &ValidateArgs) -> Result<ExitCode> {
    let pool = PredictionPool::from_csv_path(&args.pool)?;
    let accuracies = pool.accuracies();
    let lo = accuracies.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = accuracies.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    println!("pool {}", args.pool.display());
    println!("  rounds         {}", pool.len());
    println!("  models         {}", pool.num_models());
    println!("  classes        {}", pool.num_classes());
    println!("  accuracy range {lo:.4} to {hi:.4}");
    println!("  disagreement   {:.4}", pool.disagreement_fraction());
    println!("  per-model accuracy:");
    for (name, accuracy) in pool.model_names().iter().zip(&accuracies) {
        println!("    {name:<24} {accuracy:.4}");
    }
    Ok(ExitCode::SUCCESS)
}
