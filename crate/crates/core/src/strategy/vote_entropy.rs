//! Committee baseline: query probability proportional to the entropy of
//! the vote histogram,
//!
//!   VE = −Σ_c (n_c/k)·ln(n_c/k)  over classes receiving votes,
//!
//! normalized by ln(min(k, num_classes)) so a maximally split vote scores
//! 1, then scaled by β and clipped. Unanimous rounds score exactly 0.

use crate::error::Result;
use crate::math::{ClassLabel, QueryDecision};
use crate::rng::DetRng;

use super::{
    LabelOracle, QueriedAccuracy, RoundOutput, SamplerConfig, SelectiveSampler, StrategyKind,
    all_agree,
};

#[derive(Debug, Clone)]
pub struct VoteEntropy {
    beta: f64,
    /// ln(min(k, num_classes)): the entropy of the most split vote possible.
    normalizer: f64,
    t: u64,
    accuracy: QueriedAccuracy,
    votes: Vec<u32>,
    rng: DetRng,
}

impl VoteEntropy {
    pub fn new(config: &SamplerConfig) -> Result<Self> {
        config.validate()?;
        let ceiling = config.num_models.min(config.num_classes as usize) as f64;
        Ok(VoteEntropy {
            beta: config.beta,
            normalizer: ceiling.ln(),
            t: 0,
            accuracy: QueriedAccuracy::new(config.num_models),
            votes: vec![0; config.num_classes as usize],
            rng: DetRng::new(config.seed),
        })
    }

    fn normalized_entropy(&mut self, predictions: &[ClassLabel]) -> f64 {
        self.votes.fill(0);
        for &p in predictions {
            self.votes[p as usize] += 1;
        }
        let k = predictions.len() as f64;
        let mut entropy = 0.0;
        for &n in &self.votes {
            if n > 0 {
                let share = n as f64 / k;
                entropy -= share * share.ln();
            }
        }
        entropy / self.normalizer
    }
}

impl SelectiveSampler for VoteEntropy {
    fn kind(&self) -> StrategyKind {
        StrategyKind::VoteEntropy
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
            (self.beta * self.normalized_entropy(predictions)).min(1.0)
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
