//! Regret, accuracy gap, identification, and their aggregation across
//! realizations.
//!
//! Aggregation runs on exact integer ingredients (loss counts, query
//! counts) and converts to floating point only at the very end, so the
//! summary is bit-identical under any fold order or worker count.

use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::harness::trace::RealizationTrace;
use crate::stream::Stream;

/// Integer ingredients of one realization's metrics, extracted once from a
/// (trace, stream) pair and cheap to hold after both are dropped.
#[derive(Debug, Clone)]
pub struct RealizationMetrics {
    /// Learner's cumulative loss minus the best fixed model's, per round.
    /// Can dip negative mid-stream when the learner switches well.
    regret_counts: Vec<i64>,
    /// Best model's correct count minus the recommended model's.
    gap_count: u64,
    stream_len: usize,
    identified: bool,
    queries: u64,
}

impl RealizationMetrics {
    pub fn from_trace(trace: &RealizationTrace, stream: &Stream) -> Result<Self> {
        if trace.len() != stream.len() {
            return Err(CoreError::invalid(format!(
                "trace spans {} rounds, stream {}",
                trace.len(),
                stream.len()
            )));
        }
        let num_models = stream.num_models();
        if trace.final_recommendation >= num_models {
            return Err(CoreError::invalid(format!(
                "recommendation {} out of range for {num_models} models",
                trace.final_recommendation
            )));
        }

        let mut model_cum = vec![0i64; num_models];
        let mut learner_cum = 0i64;
        let mut regret_counts = Vec::with_capacity(stream.len());
        for (t0, record) in trace.rounds.iter().enumerate() {
            learner_cum += i64::from(stream.loss(t0, record.chosen_model));
            for (j, cum) in model_cum.iter_mut().enumerate() {
                *cum += i64::from(stream.loss(t0, j));
            }
            let best_cum = model_cum.iter().copied().min().expect("k >= 2");
            regret_counts.push(learner_cum - best_cum);
        }

        let counts = stream.correct_counts(stream.len());
        let max_count = counts.iter().copied().max().expect("k >= 2");
        let rec_count = counts[trace.final_recommendation];
        Ok(RealizationMetrics {
            regret_counts,
            gap_count: max_count - rec_count,
            stream_len: stream.len(),
            identified: rec_count == max_count,
            queries: trace.total_queries,
        })
    }

    /// Stream accuracy of the best model minus the recommended model's.
    pub fn accuracy_gap(&self) -> f64 {
        self.gap_count as f64 / self.stream_len as f64
    }

    /// Whether the recommendation sits in the set of stream-accuracy
    /// maximizers (exact count equality, so ties all count as success).
    pub fn identified(&self) -> bool {
        self.identified
    }

    pub fn queries(&self) -> u64 {
        self.queries
    }

    pub fn final_regret(&self) -> f64 {
        *self.regret_counts.last().expect("streams are non-empty") as f64
    }
}

/// Cumulative learner loss minus the hindsight-best fixed model's, at every
/// round prefix.
pub fn regret_curve(trace: &RealizationTrace, stream: &Stream) -> Result<Vec<f64>> {
    let m = RealizationMetrics::from_trace(trace, stream)?;
    Ok(m.regret_counts.iter().map(|&c| c as f64).collect())
}

/// Stream accuracy of the best model minus the recommended model's, in
/// [0, 1]; zero whenever the recommendation ties the winner.
pub fn accuracy_gap(trace: &RealizationTrace, stream: &Stream) -> Result<f64> {
    Ok(RealizationMetrics::from_trace(trace, stream)?.accuracy_gap())
}

/// Whether the recommended model's correct count equals the maximum.
pub fn identified(trace: &RealizationTrace, stream: &Stream) -> Result<bool> {
    Ok(RealizationMetrics::from_trace(trace, stream)?.identified())
}

/// Aggregate metrics over a batch of realizations of equal length.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsSummary {
    pub realizations: usize,
    pub mean_queries: f64,
    pub sd_queries: f64,
    pub identification_probability: f64,
    pub mean_accuracy_gap: f64,
    /// Nearest-rank 90th percentile of the per-realization gaps.
    pub p90_accuracy_gap: f64,
    /// Pointwise mean of the per-realization regret curves.
    pub mean_regret_curve: Vec<f64>,
}

impl MetricsSummary {
    pub fn final_mean_regret(&self) -> f64 {
        *self.mean_regret_curve.last().unwrap_or(&0.0)
    }
}

/// Order-free accumulator behind [`aggregate`]: push realizations in any
/// order, `finish` once at the end.
#[derive(Debug, Default)]
pub struct MetricsAccumulator {
    stream_len: Option<usize>,
    regret_sums: Vec<i64>,
    gap_counts: Vec<u64>,
    query_counts: Vec<u64>,
    identified_count: u64,
}

impl MetricsAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, m: &RealizationMetrics) -> Result<()> {
        match self.stream_len {
            None => {
                self.stream_len = Some(m.stream_len);
                self.regret_sums = vec![0; m.stream_len];
            }
            Some(len) if len == m.stream_len => {}
            Some(len) => {
                return Err(CoreError::invalid(format!(
                    "realization spans {} rounds, earlier ones {len}",
                    m.stream_len
                )));
            }
        }
        for (sum, &c) in self.regret_sums.iter_mut().zip(&m.regret_counts) {
            *sum += c;
        }
        self.gap_counts.push(m.gap_count);
        self.query_counts.push(m.queries);
        self.identified_count += u64::from(m.identified);
        Ok(())
    }

    pub fn finish(mut self) -> Result<MetricsSummary> {
        let n = self.query_counts.len();
        if n == 0 {
            return Err(CoreError::invalid("no realizations to aggregate"));
        }
        let len = self.stream_len.expect("set on first push");
        let nf = n as f64;

        let (mean_queries, sd_queries) = mean_sd(&self.query_counts);

        self.gap_counts.sort_unstable();
        let gap_total: u128 = self.gap_counts.iter().map(|&g| u128::from(g)).sum();
        let mean_accuracy_gap = gap_total as f64 / (nf * len as f64);
        let rank = (9 * n).div_ceil(10); // ⌈0.9 n⌉, 1-based
        let p90_accuracy_gap = self.gap_counts[rank - 1] as f64 / len as f64;

        Ok(MetricsSummary {
            realizations: n,
            mean_queries,
            sd_queries,
            identification_probability: self.identified_count as f64 / nf,
            mean_accuracy_gap,
            p90_accuracy_gap,
            mean_regret_curve: self.regret_sums.iter().map(|&s| s as f64 / nf).collect(),
        })
    }
}

/// Mean and sample standard deviation of integer counts, computed from
/// exact integer sums so the result never depends on summation order.
pub(crate) fn mean_sd(counts: &[u64]) -> (f64, f64) {
    let n = counts.len() as u128;
    let sum: u128 = counts.iter().map(|&q| u128::from(q)).sum();
    let sumsq: u128 = counts.iter().map(|&q| u128::from(q) * u128::from(q)).sum();
    let mean = sum as f64 / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let numerator = n * sumsq - sum * sum; // n(n−1)·variance, ≥ 0
    let sd = (numerator as f64 / (n * (n - 1)) as f64).sqrt();
    (mean, sd)
}

/// Batch aggregation of parallel (trace, stream) pairs; order-free.
pub fn aggregate(traces: &[RealizationTrace], streams: &[Stream]) -> Result<MetricsSummary> {
    if traces.is_empty() {
        return Err(CoreError::invalid("no realizations to aggregate"));
    }
    if traces.len() != streams.len() {
        return Err(CoreError::invalid(format!(
            "{} traces but {} streams",
            traces.len(),
            streams.len()
        )));
    }
    let mut acc = MetricsAccumulator::new();
    for (trace, stream) in traces.iter().zip(streams) {
        acc.push(&RealizationMetrics::from_trace(trace, stream)?)?;
    }
    acc.finish()
}

/// How separable a synthetic independent-errors instance is: per-model
/// accuracy gaps Δ_j below the winner, loss-disagreement probabilities
/// θ_j, and the hardness λ = min over losers of Δ_j²/θ_j (small λ means
/// hard). Undefined without a unique winner.
#[derive(Debug, Clone, Serialize)]
pub struct InstanceHardness {
    pub best_model: usize,
    pub unique_best: bool,
    /// Δ_j = a_best − a_j; zero at the winner.
    pub gaps: Vec<f64>,
    /// θ_j = a_best(1 − a_j) + a_j(1 − a_best); zero at the winner (a
    /// model never disagrees with itself).
    pub disagreements: Vec<f64>,
    /// Smallest gap over the losers.
    pub min_gap: f64,
    /// min over losers of Δ_j²/θ_j; `None` when the winner is tied.
    pub lambda: Option<f64>,
}

/// Hardness of a synthetic instance whose models err independently with
/// the given accuracies. `num_classes` only bounds-checks the setup; the
/// loss-disagreement probabilities do not depend on it.
pub fn instance_hardness(accuracies: &[f64], num_classes: u32) -> Result<InstanceHardness> {
    if accuracies.len() < 2 {
        return Err(CoreError::invalid("need at least two models"));
    }
    if num_classes < 2 {
        return Err(CoreError::invalid("need at least two classes"));
    }
    for &a in accuracies {
        if !(a > 0.0 && a < 1.0) {
            return Err(CoreError::invalid(format!(
                "accuracies must sit strictly inside (0, 1), got {a}"
            )));
        }
    }

    let best = accuracies
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| a.total_cmp(b))
        .map(|(i, _)| i)
        .expect("non-empty");
    let a_best = accuracies[best];
    let unique_best = accuracies
        .iter()
        .enumerate()
        .all(|(j, &a)| j == best || a < a_best);

    let gaps: Vec<f64> = accuracies.iter().map(|&a| a_best - a).collect();
    let disagreements: Vec<f64> = accuracies
        .iter()
        .enumerate()
        .map(|(j, &a)| {
            if j == best {
                0.0
            } else {
                a_best * (1.0 - a) + a * (1.0 - a_best)
            }
        })
        .collect();

    let losers = (0..accuracies.len()).filter(|&j| j != best);
    let min_gap = losers
        .clone()
        .map(|j| gaps[j])
        .min_by(f64::total_cmp)
        .expect("k >= 2");
    let lambda = unique_best.then(|| {
        losers
            .map(|j| gaps[j] * gaps[j] / disagreements[j])
            .min_by(f64::total_cmp)
            .expect("k >= 2")
    });

    Ok(InstanceHardness {
        best_model: best,
        unique_best,
        gaps,
        disagreements,
        min_gap,
        lambda,
    })
}
