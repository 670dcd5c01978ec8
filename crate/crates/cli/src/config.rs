//! Experiment configuration: defaults, an optional JSON file, and
//! command-line flags, merged in that order of increasing precedence.
//! The base seed falls back to the STREAMPICKER_SEED environment
//! variable when neither the file nor --seed provides one.

use std::path::PathBuf;
use std::sync::Arc;

use serde::Deserialize;
use streampicker_core::harness::StreamFamily;
use streampicker_core::stream::DrawMode;
use streampicker_core::{CoreError, PredictionPool, Result, StrategyKind};

/// Consulted for the base seed when neither the config file nor --seed
/// provides one; must hold an unsigned 64-bit integer.
pub const SEED_ENV: &str = "STREAMPICKER_SEED";

/// Stream source shared by the tune and run commands.
#[derive(clap::Args)]
pub struct SourceArgs {
    /// Prediction-pool CSV: one row per round, true label first, then one
    /// prediction per model (optional <path>.meta.json sidecar).
    #[arg(long, value_name = "CSV")]
    pub pool: Option<PathBuf>,

    /// Synthetic instance: comma-separated per-model accuracies in (0,1).
    #[arg(long, value_name = "A1,A2,...", value_delimiter = ',')]
    pub synth: Option<Vec<f64>>,

    /// Class count for --synth (default 2).
    #[arg(long, value_name = "C")]
    pub classes: Option<u32>,

    /// Replay pool rows in file order instead of drawing with replacement.
    #[arg(long)]
    pub replay: bool,
}

/// Flags shared by the tune and run commands. Every value is optional on
/// the command line; omitted ones fall back to the config file and then
/// to the defaults (or the --fast defaults).
#[derive(clap::Args)]
pub struct CommonArgs {
    /// JSON config file; command-line flags override its fields.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(flatten)]
    pub source: SourceArgs,

    /// Rounds per realization (default 1000, or the pool size for pools).
    #[arg(long, value_name = "T")]
    pub stream_length: Option<usize>,

    /// Seeded realizations per evaluation (default 500; 50 with --fast).
    #[arg(long, value_name = "R")]
    pub realizations: Option<u64>,

    /// Base seed (fallback: STREAMPICKER_SEED, then 0).
    #[arg(long)]
    pub seed: Option<u64>,

    /// Worker threads; 0 means all cores (default 0).
    #[arg(long, value_name = "N")]
    pub parallelism: Option<usize>,

    /// Output directory (default: results).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Lower bound of the tuning grid (default: per-strategy).
    #[arg(long, value_name = "X")]
    pub grid_min: Option<f64>,

    /// Upper bound of the tuning grid (default: per-strategy).
    #[arg(long, value_name = "X")]
    pub grid_max: Option<f64>,

    /// Tuning grid resolution (default 250; 25 with --fast).
    #[arg(long, value_name = "N")]
    pub grid_size: Option<usize>,

    /// CI-scale defaults: 50 realizations, 25 grid points.
    #[arg(long)]
    pub fast: bool,
}

/// The JSON config file mirrors the command-line flags field for field.
#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    pool: Option<PathBuf>,
    synth: Option<Vec<f64>>,
    classes: Option<u32>,
    replay: Option<bool>,
    strategies: Option<Vec<String>>,
    budgets: Option<Vec<u64>>,
    stream_length: Option<usize>,
    realizations: Option<u64>,
    seed: Option<u64>,
    parallelism: Option<usize>,
    out: Option<PathBuf>,
    beta: Option<f64>,
    grid_min: Option<f64>,
    grid_max: Option<f64>,
    grid_size: Option<usize>,
}

/// Fully resolved experiment: every field has its final value and the
/// stream source has been loaded and validated.
pub struct ExperimentConfig {
    pub family: StreamFamily,
    /// Human-readable source description for logs.
    pub source_label: String,
    pub strategies: Vec<StrategyKind>,
    pub budgets: Vec<u64>,
    pub realizations: u64,
    pub base_seed: u64,
    /// Worker threads; 0 means the rayon default (all cores).
    pub parallelism: usize,
    pub out: PathBuf,
    /// Fixed query scale: skips tuning for every strategy when set.
    pub beta: Option<f64>,
    pub grid_min: Option<f64>,
    pub grid_max: Option<f64>,
    pub grid_size: usize,
    /// Realizations averaged per tuning grid point.
    pub tune_realizations: u64,
}

fn load_file(path: &PathBuf) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CoreError::invalid(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CoreError::parse(&path.display().to_string(), e.line(), e.to_string()))
}

/// Resolves the base seed from flag, then file, then the environment.
pub fn resolve_seed(flag: Option<u64>, file: Option<u64>) -> Result<u64> {
    if let Some(seed) = flag.or(file) {
        return Ok(seed);
    }
    match std::env::var(SEED_ENV) {
        Ok(text) => text.trim().parse().map_err(|_| {
            CoreError::invalid(format!(
                "{SEED_ENV} must be an unsigned integer, got {text:?}"
            ))
        }),
        Err(_) => Ok(0),
    }
}

/// Builds the worker pool; 0 threads means the rayon default.
pub fn worker_pool(parallelism: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| CoreError::invalid(format!("cannot build the worker pool: {e}")))
}

/// Merges defaults, the config file, and the flags into a runnable
/// experiment. `strategies`, `budgets`, and `beta` come from the calling
/// subcommand since tune and run expose them differently.
pub fn resolve(
    common: &CommonArgs,
    strategies: &[String],
    budgets: &[u64],
    beta: Option<f64>,
) -> Result<ExperimentConfig> {
    let file = match &common.config {
        Some(path) => load_file(path)?,
        None => FileConfig::default(),
    };

    let replay = common.source.replay || file.replay.unwrap_or(false);
    let pool_path = common.source.pool.clone().or(file.pool);
    let synth = common.source.synth.clone().or(file.synth);
    if pool_path.is_some() && synth.is_some() {
        return Err(CoreError::invalid(
            "give either a prediction pool or synthetic accuracies, not both",
        ));
    }

    let (family, source_label) = match (pool_path, synth) {
        (Some(path), None) => {
            let pool = Arc::new(PredictionPool::from_csv_path(&path)?);
            let len = common
                .stream_length
                .or(file.stream_length)
                .unwrap_or_else(|| pool.len());
            let mode = if replay {
                DrawMode::Replay
            } else {
                DrawMode::Stochastic
            };
            if replay && len > pool.len() {
                return Err(CoreError::invalid(format!(
                    "replay of {len} rounds exceeds the pool's {} rows",
                    pool.len()
                )));
            }
            let label = format!(
                "pool {} ({} rows, {} models, {})",
                path.display(),
                pool.len(),
                pool.num_models(),
                if replay {
                    "replayed in order"
                } else {
                    "drawn with replacement"
                }
            );
            (StreamFamily::Pool { pool, mode, len }, label)
        }
        (None, Some(accuracies)) => {
            if accuracies.len() < 2 {
                return Err(CoreError::invalid("need at least two model accuracies"));
            }
            if let Some(&bad) = accuracies
                .iter()
                .find(|a| !(a.is_finite() && 0.0 < **a && **a < 1.0))
            {
                return Err(CoreError::invalid(format!(
                    "every synthetic accuracy must lie strictly between 0 and 1, got {bad}"
                )));
            }
            let num_classes = common.source.classes.or(file.classes).unwrap_or(2);
            let len = common.stream_length.or(file.stream_length).unwrap_or(1000);
            let label = format!(
                "synthetic instance ({} models, {num_classes} classes)",
                accuracies.len()
            );
            (
                StreamFamily::SynthIid {
                    accuracies,
                    num_classes,
                    len,
                },
                label,
            )
        }
        (None, None) => {
            return Err(CoreError::invalid(
                "no stream source: give --pool <csv> or --synth <accuracies>",
            ));
        }
        (Some(_), Some(_)) => unreachable!("rejected above"),
    };

    let mut parsed: Vec<StrategyKind> = Vec::new();
    let names: Vec<String> = if strategies.is_empty() {
        file.strategies.unwrap_or_default()
    } else {
        strategies.to_vec()
    };
    for name in &names {
        let kind: StrategyKind = name.parse()?;
        if !parsed.contains(&kind) {
            parsed.push(kind);
        }
    }
    if parsed.is_empty() {
        parsed = StrategyKind::ALL.to_vec();
    }

    let mut final_budgets: Vec<u64> = if budgets.is_empty() {
        file.budgets.unwrap_or_default()
    } else {
        budgets.to_vec()
    };
    final_budgets.dedup();
    for &b in &final_budgets {
        if b as usize > family.len() {
            return Err(CoreError::invalid(format!(
                "budget {b} exceeds the stream length {}",
                family.len()
            )));
        }
    }

    let realizations = common
        .realizations
        .or(file.realizations)
        .unwrap_or(if common.fast { 50 } else { 500 });
    if realizations == 0 {
        return Err(CoreError::invalid("realizations must be at least 1"));
    }

    Ok(ExperimentConfig {
        family,
        source_label,
        strategies: parsed,
        budgets: final_budgets,
        realizations,
        base_seed: resolve_seed(common.seed, file.seed)?,
        parallelism: common.parallelism.or(file.parallelism).unwrap_or(0),
        out: common
            .out
            .clone()
            .or(file.out)
            .unwrap_or_else(|| PathBuf::from("results")),
        beta: beta.or(file.beta),
        grid_min: common.grid_min.or(file.grid_min),
        grid_max: common.grid_max.or(file.grid_max),
        grid_size: common
            .grid_size
            .or(file.grid_size)
            .unwrap_or(if common.fast { 25 } else { 250 }),
        tune_realizations: if common.fast { 50 } else { 100 },
    })
}
