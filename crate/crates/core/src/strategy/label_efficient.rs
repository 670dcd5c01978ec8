//! Passive baseline: flip a fixed coin on every round where the models
//! disagree. The coin's bias ε = budget / stream length makes the expected
//! number of queries comparable to the tuned strategies without any search.

use crate::error::{CoreError, Result};
use crate::math::{ClassLabel, QueryDecision};
use crate::rng::DetRng;

use super::{
    LabelOracle, QueriedAccuracy, RoundOutput, SamplerConfig, SelectiveSampler, StrategyKind,
    all_agree,
};

#[derive(Debug, Clone)]
pub struct LabelEfficient {
    epsilon: f64,
    t: u64,
    accuracy: QueriedAccuracy,
    rng: DetRng,
}

impl LabelEfficient {
    /// Requires both hints: ε = budget_hint / stream_length_hint.
    pub fn new(config: &SamplerConfig) -> Result<Self> {
        config.validate()?;
        let (budget, length) = match (config.budget_hint, config.stream_length_hint) {
            (Some(b), Some(t)) if t > 0 => (b, t),
            _ => {
                return Err(CoreError::invalid(
                    "label-efficient sampling needs budget and stream-length hints (ε = b/T)",
                ));
            }
        };
        Ok(LabelEfficient {
            epsilon: (budget as f64 / length as f64).min(1.0),
            t: 0,
            accuracy: QueriedAccuracy::new(config.num_models),
            rng: DetRng::new(config.seed),
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

impl SelectiveSampler for LabelEfficient {
    fn kind(&self) -> StrategyKind {
        StrategyKind::LabelEfficient
    }

    fn rounds_seen(&self) -> u64 {
        self.t
    }

    fn step(
        &mut self,
        predictions: &[ClassLabel],
        oracle: LabelOracle<'_>,
    ) -> Result<(RoundOutput, usize)> {
        let rng_checkpoint = self.rng.snapshot();
        let recommendation = self.accuracy.recommend();
        let q = if all_agree(predictions) {
            0.0
        } else {
            self.epsilon
        };
        let queried = self.rng.bernoulli(q);
        if queried {
            let label = match oracle() {
                Ok(label) => label,
                Err(e) => {
                    self.rng.restore(rng_checkpoint);
                    return Err(e);
                }
            };
            self.accuracy.record(predictions, label);
        }
        self.t += 1;

        Ok((
            RoundOutput {
                predicted_label: predictions[recommendation],
                chosen_model: recommendation,
                decision: QueryDecision {
                    probability: q,
                    queried,
                },
            },
            recommendation,
        ))
    }

    fn recommend(&self) -> usize {
        self.accuracy.recommend()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::synth_iid;

    #[test]
    fn epsilon_is_budget_over_length() {
        let cfg = SamplerConfig::new(2, 2, 1.0, 0).with_hints(1000, 100);
        assert_eq!(LabelEfficient::new(&cfg).unwrap().epsilon(), 0.1);

        let missing = SamplerConfig::new(2, 2, 1.0, 0);
        assert!(LabelEfficient::new(&missing).is_err());
    }

    #[test]
    fn expected_queries_track_epsilon_times_disagreements() {
        // 500 seeds on a fixed stream: the mean query count concentrates on
        // ε · (# disagreement rounds) within 3 binomial σ.
        let stream = synth_iid(&[0.8, 0.5], 2, 400, 77).unwrap();
        let disagreements = (0..stream.len())
            .filter(|&t| !all_agree(stream.row(t)))
            .count() as f64;
        let epsilon = 0.1;
        let seeds = 500u64;
        let mut total = 0u64;
        for seed in 0..seeds {
            let cfg = SamplerConfig::new(2, 2, 1.0, seed).with_hints(400, 40);
            let mut sampler = LabelEfficient::new(&cfg).unwrap();
            for t in 0..stream.len() {
                let label = stream.label(t);
                let mut oracle = move || Ok(label);
                let (out, _) = sampler.step(stream.row(t), &mut oracle).unwrap();
                total += u64::from(out.decision.queried);
            }
        }
        let mean = total as f64 / seeds as f64;
        let expected = epsilon * disagreements;
        let sigma = (disagreements * epsilon * (1.0 - epsilon) / seeds as f64).sqrt();
        assert!(
            (mean - expected).abs() <= 3.0 * sigma,
            "mean {mean} vs expected {expected} (σ = {sigma})"
        );
    }

    #[test]
    fn recommends_the_queried_accuracy_leader() {
        let stream = synth_iid(&[0.55, 0.95, 0.7], 3, 600, 3).unwrap();
        let cfg = SamplerConfig::new(3, 3, 1.0, 5).with_hints(600, 300);
        let mut sampler = LabelEfficient::new(&cfg).unwrap();
        for t in 0..stream.len() {
            let label = stream.label(t);
            let mut oracle = move || Ok(label);
            sampler.step(stream.row(t), &mut oracle).unwrap();
        }
        assert_eq!(sampler.recommend(), 1);
    }
}
