//! The run subcommand: for every (strategy, budget) pair, match the
//! query scale to the budget (unless one is pinned), evaluate seeded
//! realizations, and persist one JSONL file per pair plus a summary CSV.

use std::process::ExitCode;

use streampicker_core::harness::{EvalSpec, SummaryRow, evaluate, write_jsonl, write_summary_csv};
use streampicker_core::tuning::{TuningSpec, choose_beta, tuning_table};
use streampicker_core::{Result, StrategyKind};

use crate::config::{self, ExperimentConfig};

#[derive(clap::Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: config::CommonArgs,

    /// Strategy to evaluate (repeatable; default: every strategy).
    #[arg(long = "strategy", value_name = "NAME")]
    pub strategies: Vec<String>,

    /// Label budget to evaluate (repeatable).
    #[arg(long = "budget", value_name = "B")]
    pub budgets: Vec<u64>,

    /// Fixed query scale: skip tuning and use this for every strategy.
    #[arg(long, value_name = "X")]
    pub beta: Option<f64>,
}

pub fn execute(args: &RunArgs) -> Result<ExitCode> {
    let cfg = config::resolve(&args.common, &args.strategies, &args.budgets, args.beta)?;
    if cfg.budgets.is_empty() {
        return Err(streampicker_core::CoreError::invalid(
            "at least one budget is required: pass --budget or set budgets in the config",
        ));
    }
    let workers = config::worker_pool(cfg.parallelism)?;
    workers.install(|| run_experiment(&cfg))
}

/// Picks the query scale for each budget: the pinned --beta if given, a
/// neutral 1.0 for the fixed-coin strategy (its spend comes from the
/// budget hint), and otherwise one shared grid search per strategy.
fn scales_for(cfg: &ExperimentConfig, kind: StrategyKind) -> Result<Vec<(u64, f64)>> {
    if let Some(beta) = cfg.beta {
        return Ok(cfg.budgets.iter().map(|&b| (b, beta)).collect());
    }
    if kind == StrategyKind::LabelEfficient {
        return Ok(cfg.budgets.iter().map(|&b| (b, 1.0)).collect());
    }

    // TuningSpec::new carries the per-strategy default grid bounds.
    let defaults = TuningSpec::new(kind, cfg.budgets[0], cfg.base_seed);
    let lo = cfg.grid_min.unwrap_or(defaults.grid_min);
    let hi = cfg.grid_max.unwrap_or(defaults.grid_max);
    let table = tuning_table(
        kind,
        &cfg.family,
        lo,
        hi,
        cfg.grid_size,
        cfg.tune_realizations,
        cfg.base_seed,
    )?;
    let mut scales = Vec::with_capacity(cfg.budgets.len());
    for &budget in &cfg.budgets {
        let (index, saturated) = choose_beta(&table, budget, cfg.tune_realizations);
        if saturated {
            eprintln!(
                "warning: {kind} misses the {budget}-label budget on the grid [{lo}, {hi}] \
                 with {} points; closest mean is {:.1}. Widen the bounds or raise --grid-size.",
                cfg.grid_size, table[index].mean_queries
            );
        }
        scales.push((budget, table[index].beta));
    }
    Ok(scales)
}

fn run_experiment(cfg: &ExperimentConfig) -> Result<ExitCode> {
    println!("source: {}", cfg.source_label);
    println!(
        "rounds {}, realizations {}, base seed {}",
        cfg.family.len(),
        cfg.realizations,
        cfg.base_seed
    );

    let mut summaries = Vec::new();
    for &kind in &cfg.strategies {
        for (budget, beta) in scales_for(cfg, kind)? {
            let mut spec = EvalSpec::new(kind, beta, budget);
            spec.realizations = cfg.realizations;
            spec.base_seed = cfg.base_seed;
            let outcome = evaluate(&cfg.family, &spec).map_err(|e| {
                e.with_context(format!(
                    "{kind} at budget {budget} (base seed {})",
                    cfg.base_seed
                ))
            })?;

            let path = cfg.out.join(format!("{}_b{budget}.jsonl", kind.name()));
            write_jsonl(&path, &outcome.rows)?;
            let s = &outcome.summary;
            println!(
                "  {kind} b={budget}: scale {beta:.4}, queries {:.1} (sd {:.1}), \
                 identification {:.3}, gap {:.4}, regret {:.1}",
                s.mean_queries,
                s.sd_queries,
                s.identification_probability,
                s.mean_accuracy_gap,
                s.final_mean_regret()
            );
            summaries.push(SummaryRow {
                strategy: kind,
                budget,
                summary: outcome.summary,
            });
        }
    }

    let csv_path = cfg.out.join("summary.csv");
    write_summary_csv(&csv_path, &summaries)?;
    println!(
        "wrote {} evaluation files and {}",
        summaries.len(),
        csv_path.display()
    );
    Ok(ExitCode::SUCCESS)
}
