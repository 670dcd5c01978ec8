//! The tune subcommand: grid-search one strategy's query scale so its
//! mean label spend matches a budget, then persist the table and the
//! chosen point.

use std::process::ExitCode;

use streampicker_core::tuning::{TuningSpec, tune, write_tuning_result};
use streampicker_core::{Result, StrategyKind};

use crate::config;

#[derive(clap::Args)]
pub struct TuneArgs {
    #[command(flatten)]
    pub common: config::CommonArgs,

    /// Strategy whose scale to tune.
    #[arg(long, value_name = "NAME")]
    pub strategy: String,

    /// Label budget the scale must hit in expectation.
    #[arg(long, value_name = "B")]
    pub budget: u64,
}

pub fn execute(args: &TuneArgs) -> Result<ExitCode> {
    let kind: StrategyKind = args.strategy.parse()?;
    let cfg = config::resolve(&args.common, &[], &[args.budget], None)?;

    let mut spec = TuningSpec::new(kind, args.budget, cfg.base_seed);
    if let Some(lo) = cfg.grid_min {
        spec.grid_min = lo;
    }
    if let Some(hi) = cfg.grid_max {
        spec.grid_max = hi;
    }
    spec.grid_size = cfg.grid_size;
    spec.realizations = cfg.tune_realizations;

    let workers = config::worker_pool(cfg.parallelism)?;
    let result = workers.install(|| tune(&spec, &cfg.family))?;

    let stem = format!("tune_{}_b{}", kind.name(), args.budget);
    let csv_path = cfg.out.join(format!("{stem}.csv"));
    let json_path = cfg.out.join(format!("{stem}.json"));
    write_tuning_result(&result, &csv_path, &json_path)?;

    println!("source: {}", cfg.source_label);
    println!(
        "{kind} budget {}: scale {:.6} spends {:.1} labels on average (sd {:.1})",
        args.budget, result.chosen_beta, result.mean_queries, result.sd_queries
    );
    if result.saturated {
        eprintln!(
            "warning: no grid point matches the budget; the closest spends {:.1} labels. \
             Widen --grid-min/--grid-max, raise --grid-size, or pick a budget the \
             strategy can spend.",
            result.mean_queries
        );
    }
    println!("wrote {} and {}", csv_path.display(), json_path.display());
    Ok(ExitCode::SUCCESS)
}
