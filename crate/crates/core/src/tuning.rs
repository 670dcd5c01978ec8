//! Budget matching: grid search over each strategy's scale hyperparameter
//! so that mean label queries hit a target budget.
//!
//! The table is built once per strategy and is budget-independent: every
//! grid point replays the same tuning streams and strategy seeds (common
//! random numbers), so neighboring points differ only through the
//! hyperparameter and the table stays smooth enough for the monotonicity
//! diagnostic to mean something. Budgets are matched in expectation, not
//! capped per run.
//!
//! The fixed-coin strategy skips the search: its coin is the budget over
//! the stream length, and its expected query count is that coin times the
//! expected number of split rounds, both in closed form.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::harness::runner::StreamFamily;
use crate::harness::{metrics, persist};
use crate::rng::{TUNE_TAG, derive_seed};
use crate::strategy::{SamplerConfig, StrategyKind};
use crate::stream::Stream;

/// What to tune and how hard.
#[derive(Debug, Clone)]
pub struct TuningSpec {
    pub kind: StrategyKind,
    pub grid_min: f64,
    pub grid_max: f64,
    /// Number of equally spaced grid points, endpoints included.
    pub grid_size: usize,
    /// Target mean number of label queries.
    pub budget: u64,
    /// Realizations averaged per grid point.
    pub realizations: u64,
    pub base_seed: u64,
}

impl TuningSpec {
    /// Spec with the default grid for `kind` (see [`default_grid`]),
    /// 250 grid points, and 100 realizations per point.
    pub fn new(kind: StrategyKind, budget: u64, base_seed: u64) -> Self {
        let (grid_min, grid_max) = default_grid(kind);
        TuningSpec {
            kind,
            grid_min,
            grid_max,
            grid_size: 250,
            budget,
            realizations: 100,
            base_seed,
        }
    }

    fn validate(&self, family: &StreamFamily) -> Result<()> {
        if !(self.grid_min.is_finite() && self.grid_max.is_finite()) {
            return Err(CoreError::invalid("grid bounds must be finite"));
        }
        if self.grid_min < 0.0 {
            return Err(CoreError::invalid("grid bounds must be nonnegative"));
        }
        if self.grid_min >= self.grid_max {
            return Err(CoreError::invalid(format!(
                "grid lower bound {} must sit below upper bound {}",
                self.grid_min, self.grid_max
            )));
        }
        if self.grid_size < 2 {
            return Err(CoreError::invalid("grid needs at least two points"));
        }
        if self.realizations == 0 {
            return Err(CoreError::invalid("need at least one tuning realization"));
        }
        if self.budget as usize > family.len() {
            return Err(CoreError::invalid(format!(
                "budget {} exceeds stream length {}",
                self.budget,
                family.len()
            )));
        }
        Ok(())
    }
}

/// Default grid bounds per strategy, sized so the practical budget range
/// (a few percent of T up to saturation) falls inside.
pub fn default_grid(kind: StrategyKind) -> (f64, f64) {
    match kind {
        StrategyKind::ModelPicker => (0.0, 16.0),
        StrategyKind::LabelEfficient => (0.0, 1.0), // coin, set analytically
        StrategyKind::VoteEntropy => (0.0, 1.5),
        StrategyKind::Sqbc => (0.0, 8.0),
        StrategyKind::Iwal => (0.0, 1.0),
        StrategyKind::Efal => (0.0, 2.0),
    }
}

/// One measured operating point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPoint {
    pub beta: f64,
    pub mean_queries: f64,
    pub sd_queries: f64,
}

/// Outcome of tuning one strategy to one budget.
#[derive(Debug, Clone, Serialize)]
pub struct TuningResult {
    pub strategy: String,
    pub budget: u64,
    /// Chosen grid point (for the fixed-coin strategy: the analytic coin).
    pub chosen_beta: f64,
    pub mean_queries: f64,
    pub sd_queries: f64,
    /// Set when even the best grid point misses the budget by more than
    /// max(5% of the budget, twice the standard error).
    pub saturated: bool,
    /// Fraction of adjacent grid pairs where mean queries does not
    /// decrease as the hyperparameter grows.
    pub monotone_fraction: f64,
    pub table: Vec<GridPoint>,
}

/// Runs the strategy over one stream and counts bought labels.
fn count_queries(stream: &Stream, kind: StrategyKind, config: &SamplerConfig) -> Result<u64> {
    let mut sampler = kind.build(config)?;
    let mut queries = 0u64;
    for t0 in 0..stream.len() {
        let label = stream.label(t0);
        let mut oracle = || Ok(label);
        let (output, _) = sampler.step(stream.row(t0), &mut oracle)?;
        queries += u64::from(output.decision.queried);
    }
    Ok(queries)
}

/// Measures mean and s.d. of query counts at every grid point. The table
/// does not depend on the budget, so one sweep serves any number of
/// budgets via [`choose_beta`]. Parallel over grid points, bit-stable for
/// any worker count.
pub fn tuning_table(
    kind: StrategyKind,
    family: &StreamFamily,
    grid_min: f64,
    grid_max: f64,
    grid_size: usize,
    realizations: u64,
    base_seed: u64,
) -> Result<Vec<GridPoint>> {
    if kind == StrategyKind::LabelEfficient {
        return Err(CoreError::invalid(
            "the fixed-coin strategy is tuned analytically, not by search",
        ));
    }
    let streams: Vec<Stream> = (0..realizations)
        .map(|r| family.realize(base_seed, TUNE_TAG, r))
        .collect::<Result<_>>()?;
    let seeds: Vec<u64> = (0..realizations)
        .map(|r| derive_seed(base_seed, &[TUNE_TAG, r, kind.seed_tag()]))
        .collect();

    let betas: Vec<f64> = (0..grid_size)
        .map(|i| {
            if i == grid_size - 1 {
                grid_max
            } else {
                grid_min + (grid_max - grid_min) * i as f64 / (grid_size - 1) as f64
            }
        })
        .collect();

    betas
        .par_iter()
        .map(|&beta| {
            let mut counts = Vec::with_capacity(streams.len());
            for (stream, &seed) in streams.iter().zip(&seeds) {
                let config =
                    SamplerConfig::new(stream.num_models(), stream.num_classes(), beta, seed)
                        .with_hints(stream.len() as u64, 0);
                counts.push(count_queries(stream, kind, &config)?);
            }
            let (mean_queries, sd_queries) = metrics::mean_sd(&counts);
            Ok(GridPoint {
                beta,
                mean_queries,
                sd_queries,
            })
        })
        .collect()
}

/// Index of the grid point whose mean query count sits closest to the
/// budget (ties to the smaller hyperparameter), plus whether even that
/// point misses by more than max(5% of the budget, twice its standard
/// error over `realizations` runs).
pub fn choose_beta(table: &[GridPoint], budget: u64, realizations: u64) -> (usize, bool) {
    assert!(!table.is_empty(), "empty tuning table");
    let target = budget as f64;
    let mut best = 0usize;
    for (i, point) in table.iter().enumerate() {
        if (point.mean_queries - target).abs() < (table[best].mean_queries - target).abs() {
            best = i;
        }
    }
    let chosen = &table[best];
    let standard_error = chosen.sd_queries / (realizations as f64).sqrt();
    let tolerance = (0.05 * target).max(2.0 * standard_error);
    let saturated = (chosen.mean_queries - target).abs() > tolerance;
    (best, saturated)
}

/// Fraction of adjacent grid pairs where mean queries is non-decreasing.
fn monotone_fraction(table: &[GridPoint]) -> f64 {
    if table.len() < 2 {
        return 1.0;
    }
    let rising = table
        .windows(2)
        .filter(|w| w[1].mean_queries >= w[0].mean_queries)
        .count();
    rising as f64 / (table.len() - 1) as f64
}

/// Tunes one strategy to one budget on one stream family.
pub fn tune(spec: &TuningSpec, family: &StreamFamily) -> Result<TuningResult> {
    spec.validate(family)?;

    if spec.kind == StrategyKind::LabelEfficient {
        let coin = spec.budget as f64 / family.len() as f64;
        let mean_queries = coin * family.len() as f64 * family.disagreement_fraction();
        let table = vec![GridPoint {
            beta: coin,
            mean_queries,
            sd_queries: 0.0,
        }];
        let saturated = (mean_queries - spec.budget as f64).abs() > 0.05 * spec.budget as f64;
        return Ok(TuningResult {
            strategy: spec.kind.name().to_string(),
            budget: spec.budget,
            chosen_beta: coin,
            mean_queries,
            sd_queries: 0.0,
            saturated,
            monotone_fraction: 1.0,
            table,
        });
    }

    let table = tuning_table(
        spec.kind,
        family,
        spec.grid_min,
        spec.grid_max,
        spec.grid_size,
        spec.realizations,
        spec.base_seed,
    )?;
    let (chosen, saturated) = choose_beta(&table, spec.budget, spec.realizations);
    Ok(TuningResult {
        strategy: spec.kind.name().to_string(),
        budget: spec.budget,
        chosen_beta: table[chosen].beta,
        mean_queries: table[chosen].mean_queries,
        sd_queries: table[chosen].sd_queries,
        saturated,
        monotone_fraction: monotone_fraction(&table),
        table,
    })
}

/// Renders the tuning table as CSV.
pub fn table_csv(table: &[GridPoint]) -> String {
    let mut out = String::from("beta,mean_queries,sd_queries\n");
    for point in table {
        out.push_str(&format!(
            "{},{},{}\n",
            point.beta, point.mean_queries, point.sd_queries
        ));
    }
    out
}

/// Persists the table as CSV and the chosen point as JSON, atomically.
pub fn write_tuning_result(
    result: &TuningResult,
    csv_path: &std::path::Path,
    json_path: &std::path::Path,
) -> Result<()> {
    persist::write_atomic(csv_path, table_csv(&result.table).as_bytes())?;
    let mut json = serde_json::to_string_pretty(result).map_err(std::io::Error::other)?;
    json.push('\n');
    persist::write_atomic(json_path, json.as_bytes())
}
