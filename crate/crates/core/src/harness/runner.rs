//! Stream families and the budget-matched evaluation loop.
//!
//! Every random object is derived from (base seed, purpose tag,
//! realization index, role tag), so a realization's stream and strategy
//! seeds never depend on worker count or scheduling; together with the
//! integer aggregation in [`super::metrics`] this makes whole experiments
//! reproducible bit for bit under any parallelism.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::harness::metrics::{MetricsAccumulator, MetricsSummary, RealizationMetrics};
use crate::harness::trace::run_realization;
use crate::pool::PredictionPool;
use crate::rng::{EVAL_TAG, STREAM_TAG, derive_seed};
use crate::strategy::{SamplerConfig, StrategyKind};
use crate::stream::{self, DrawMode, DriftSegment, Stream};

/// A distribution over streams: one realization per index. Families are
/// cheap to clone and safe to share across workers (pool data is behind an
/// `Arc` and read-only).
#[derive(Debug, Clone)]
pub enum StreamFamily {
    /// Independent rounds; each model errs independently at its accuracy.
    SynthIid {
        accuracies: Vec<f64>,
        num_classes: u32,
        len: usize,
    },
    /// Piecewise-independent rounds with per-segment accuracies.
    SynthDrift {
        segments: Vec<DriftSegment>,
        num_classes: u32,
    },
    /// The deterministic two-model worst case; every round splits.
    Alternating { len: usize },
    /// Rows drawn from a fixed prediction pool.
    Pool {
        pool: Arc<PredictionPool>,
        mode: DrawMode,
        len: usize,
    },
}

impl StreamFamily {
    /// Rounds per realization.
    pub fn len(&self) -> usize {
        match self {
            StreamFamily::SynthIid { len, .. } => *len,
            StreamFamily::SynthDrift { segments, .. } => segments
                .last()
                .map(|seg| seg.last_round as usize)
                .unwrap_or(0),
            StreamFamily::Alternating { len } => *len,
            StreamFamily::Pool { len, .. } => *len,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_models(&self) -> usize {
        match self {
            StreamFamily::SynthIid { accuracies, .. } => accuracies.len(),
            StreamFamily::SynthDrift { segments, .. } => segments
                .first()
                .map(|seg| seg.accuracies.len())
                .unwrap_or(0),
            StreamFamily::Alternating { .. } => 2,
            StreamFamily::Pool { pool, .. } => pool.num_models(),
        }
    }

    pub fn num_classes(&self) -> u32 {
        match self {
            StreamFamily::SynthIid { num_classes, .. }
            | StreamFamily::SynthDrift { num_classes, .. } => *num_classes,
            StreamFamily::Alternating { .. } => 2,
            StreamFamily::Pool { pool, .. } => pool.num_classes(),
        }
    }

    /// Draws realization number `realization` for the given purpose
    /// (tuning and evaluation use disjoint purpose tags, so their streams
    /// never overlap).
    pub fn realize(&self, base_seed: u64, purpose: u64, realization: u64) -> Result<Stream> {
        let seed = derive_seed(base_seed, &[purpose, realization, STREAM_TAG]);
        match self {
            StreamFamily::SynthIid {
                accuracies,
                num_classes,
                len,
            } => stream::synth_iid(accuracies, *num_classes, *len, seed),
            StreamFamily::SynthDrift {
                segments,
                num_classes,
            } => stream::synth_drift(segments, *num_classes, seed),
            StreamFamily::Alternating { len } => stream::alternating_stream(*len),
            StreamFamily::Pool { pool, mode, len } => stream::draw_stream(pool, *mode, *len, seed),
        }
    }

    /// Expected fraction of rounds whose prediction vector splits, exact
    /// for every family (the fixed-coin strategy's analytic tuning needs
    /// it). For pools this scans the rows the draws can touch.
    pub fn disagreement_fraction(&self) -> f64 {
        match self {
            StreamFamily::SynthIid {
                accuracies,
                num_classes,
                ..
            } => iid_disagreement(accuracies, *num_classes),
            StreamFamily::SynthDrift {
                segments,
                num_classes,
            } => {
                let total: f64 = segments
                    .iter()
                    .map(|seg| {
                        let rounds = (seg.last_round - seg.first_round + 1) as f64;
                        rounds * iid_disagreement(&seg.accuracies, *num_classes)
                    })
                    .sum();
                total / self.len() as f64
            }
            StreamFamily::Alternating { .. } => 1.0,
            StreamFamily::Pool { pool, mode, len } => {
                let rows = match mode {
                    DrawMode::Stochastic => pool.len(),
                    DrawMode::Replay => (*len).min(pool.len()),
                };
                let splits = (0..rows)
                    .filter(|&r| {
                        let row = pool.row(r);
                        row.iter().any(|&p| p != row[0])
                    })
                    .count();
                splits as f64 / rows as f64
            }
        }
    }

    /// Whole-pool per-model accuracies, when the family draws from a pool
    /// stochastically (the one case where the stream-level winner can
    /// differ from the pool-level one).
    pub fn pool_accuracies(&self) -> Option<Vec<f64>> {
        match self {
            StreamFamily::Pool {
                pool,
                mode: DrawMode::Stochastic,
                ..
            } => Some(pool.accuracies()),
            _ => None,
        }
    }
}

/// Probability that a round of independent models with these accuracies
/// splits: one minus (all correct) minus (all wrong on the same class;
/// wrong classes are uniform over the remaining `num_classes − 1`).
fn iid_disagreement(accuracies: &[f64], num_classes: u32) -> f64 {
    let all_correct: f64 = accuracies.iter().product();
    let all_wrong: f64 = accuracies.iter().map(|&a| 1.0 - a).product();
    let same_wrong = all_wrong / f64::from(num_classes - 1).powi(accuracies.len() as i32 - 1);
    1.0 - all_correct - same_wrong
}

/// One (strategy, operating point) to evaluate.
#[derive(Debug, Clone)]
pub struct EvalSpec {
    pub kind: StrategyKind,
    /// Tuned scale hyperparameter (ignored by `label-efficient`, which
    /// derives its coin from the budget and stream length hints).
    pub beta: f64,
    /// Target label budget; recorded and passed to the strategy as a hint.
    pub budget: u64,
    pub realizations: u64,
    pub base_seed: u64,
    /// `model-picker` only: predict with the leader instead of sampling.
    pub follow_leader: bool,
    pub iwal_threshold_scale: f64,
}

impl EvalSpec {
    pub fn new(kind: StrategyKind, beta: f64, budget: u64) -> Self {
        EvalSpec {
            kind,
            beta,
            budget,
            realizations: 500,
            base_seed: 0,
            follow_leader: false,
            iwal_threshold_scale: 1.0,
        }
    }
}

/// One line of the per-realization results file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRow {
    /// Strategy seed of the realization (streams derive from the same
    /// base seed and realization index under the stream tag).
    pub seed: u64,
    pub total_queries: u64,
    pub final_recommendation: usize,
    pub identified: bool,
    pub accuracy_gap: f64,
    pub final_regret: f64,
    /// Winner-minus-recommended gap measured on the whole pool; only
    /// present for stochastically drawn pool streams.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pool_accuracy_gap: Option<f64>,
}

/// Everything one evaluation produced: the aggregate summary plus one row
/// per realization, in realization order.
#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub summary: MetricsSummary,
    pub rows: Vec<EvalRow>,
}

/// Runs `spec.realizations` independent realizations of (family × strategy)
/// and aggregates them. Parallel over realizations; the outcome is
/// bit-identical for any worker count.
pub fn evaluate(family: &StreamFamily, spec: &EvalSpec) -> Result<EvalOutcome> {
    if spec.realizations == 0 {
        return Err(CoreError::invalid("need at least one realization"));
    }
    if spec.budget as usize > family.len() {
        return Err(CoreError::invalid(format!(
            "budget {} exceeds stream length {}",
            spec.budget,
            family.len()
        )));
    }
    let pool_accuracies = family.pool_accuracies();
    let pool_best = pool_accuracies
        .as_ref()
        .map(|accs| accs.iter().copied().fold(f64::NEG_INFINITY, f64::max));

    let per: Result<Vec<(EvalRow, RealizationMetrics)>> = (0..spec.realizations)
        .into_par_iter()
        .map(|r| {
            let stream = family.realize(spec.base_seed, EVAL_TAG, r)?;
            let strategy_seed = derive_seed(spec.base_seed, &[EVAL_TAG, r, spec.kind.seed_tag()]);
            let mut config = SamplerConfig::new(
                stream.num_models(),
                stream.num_classes(),
                spec.beta,
                strategy_seed,
            )
            .with_hints(stream.len() as u64, spec.budget);
            config.follow_leader = spec.follow_leader;
            config.iwal_threshold_scale = spec.iwal_threshold_scale;

            let trace = run_realization(&stream, spec.kind, &config).map_err(|e| {
                e.with_context(format!(
                    "{} at budget {}, realization {r}",
                    spec.kind, spec.budget
                ))
            })?;
            let metrics = RealizationMetrics::from_trace(&trace, &stream)?;
            let pool_accuracy_gap = pool_accuracies.as_ref().map(|accs| {
                pool_best.expect("set alongside accuracies") - accs[trace.final_recommendation]
            });
            let row = EvalRow {
                seed: strategy_seed,
                total_queries: trace.total_queries,
                final_recommendation: trace.final_recommendation,
                identified: metrics.identified(),
                accuracy_gap: metrics.accuracy_gap(),
                final_regret: metrics.final_regret(),
                pool_accuracy_gap,
            };
            Ok((row, metrics))
        })
        .collect();

    let per = per?;
    let mut acc = MetricsAccumulator::new();
    for (_, metrics) in &per {
        acc.push(metrics)?;
    }
    Ok(EvalOutcome {
        summary: acc.finish()?,
        rows: per.into_iter().map(|(row, _)| row).collect(),
    })
}
