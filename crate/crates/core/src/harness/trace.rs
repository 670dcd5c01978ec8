//! Running one (stream × strategy) pass and recording the full trace.

use std::cell::Cell;

use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::strategy::{SamplerConfig, StrategyKind};
use crate::stream::Stream;

/// One observed round. `recommendation` is the best-model estimate that was
/// in force when the round was predicted, before its own update landed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundRecord {
    /// 1-based round index.
    pub round: u64,
    /// Model whose prediction was emitted.
    pub chosen_model: usize,
    /// Zero-one loss of the emitted prediction against the true label.
    pub learner_loss: u8,
    /// Whether the label was bought.
    pub queried: bool,
    /// Probability the query coin was flipped with.
    pub query_probability: f64,
    /// Best-model estimate entering the round.
    pub recommendation: usize,
}

/// Everything one realization produced, in round order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RealizationTrace {
    /// Strategy seed the realization ran under.
    pub seed: u64,
    /// Best-model estimate after the final round.
    pub final_recommendation: usize,
    /// Number of rounds whose label was bought; always equals the number
    /// of `queried` flags set in `rounds`.
    pub total_queries: u64,
    pub rounds: Vec<RoundRecord>,
}

impl RealizationTrace {
    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }
}

/// Runs one strategy over the whole stream, answering every query from the
/// stream's own labels. The oracle is charged exactly once on queried
/// rounds and never otherwise (asserted every round). Deterministic given
/// the stream and `config.seed`.
pub fn run_realization(
    stream: &Stream,
    kind: StrategyKind,
    config: &SamplerConfig,
) -> Result<RealizationTrace> {
    if config.num_models != stream.num_models() {
        return Err(CoreError::invalid(format!(
            "config lists {} models, stream carries {}",
            config.num_models,
            stream.num_models()
        )));
    }
    if config.num_classes != stream.num_classes() {
        return Err(CoreError::invalid(format!(
            "config lists {} classes, stream carries {}",
            config.num_classes,
            stream.num_classes()
        )));
    }

    let mut sampler = kind.build(config)?;
    let mut rounds = Vec::with_capacity(stream.len());
    let mut total_queries = 0u64;

    for t0 in 0..stream.len() {
        let label = stream.label(t0);
        let oracle_calls = Cell::new(0u32);
        let mut oracle = || {
            oracle_calls.set(oracle_calls.get() + 1);
            Ok(label)
        };
        let (output, recommendation) = sampler
            .step(stream.row(t0), &mut oracle)
            .map_err(|e| e.with_context(format!("{} at round {}", kind.name(), t0 + 1)))?;
        assert_eq!(
            oracle_calls.get(),
            u32::from(output.decision.queried),
            "label oracle must be charged exactly once per queried round"
        );

        total_queries += u64::from(output.decision.queried);
        rounds.push(RoundRecord {
            round: (t0 + 1) as u64,
            chosen_model: output.chosen_model,
            learner_loss: stream.loss(t0, output.chosen_model),
            queried: output.decision.queried,
            query_probability: output.decision.probability,
            recommendation,
        });
    }

    Ok(RealizationTrace {
        seed: config.seed,
        final_recommendation: sampler.recommend(),
        total_queries,
        rounds,
    })
}
