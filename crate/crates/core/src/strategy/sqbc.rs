//! Stream-based query-by-committee baseline. Two committee members are
//! drawn with replacement from a posterior proportional to exp(−β·cumulative
//! loss); the query probability is the historical pairwise disagreement rate
//! of that pair (current round included). Unanimous rounds are structurally
//! skipped: no posterior draws are consumed and q is exactly 0.
//!
//! Loss sums are stored pre-scaled by β so the posterior is a plain
//! softmax over them; this matches a multiplicative update with factor
//! exp(−β·ℓ) per queried round without underflow for long horizons.

use crate::error::Result;
use crate::math::{ClassLabel, QueryDecision, exp_weights_into};
use crate::rng::DetRng;

use super::{
    LabelOracle, QueriedAccuracy, RoundOutput, SamplerConfig, SelectiveSampler, StrategyKind,
    all_agree,
};

#[derive(Debug, Clone)]
pub struct Sqbc {
    beta: f64,
    t: u64,
    /// β-scaled cumulative losses of queried rounds; posterior ∝ exp(−S).
    scaled_losses: Vec<f64>,
    /// disagreement_counts[i][j]: rounds so far where models i and j differed.
    disagreement_counts: Vec<Vec<u64>>,
    accuracy: QueriedAccuracy,
    posterior_buf: Vec<f64>,
    rng: DetRng,
}

impl Sqbc {
    pub fn new(config: &SamplerConfig) -> Result<Self> {
        config.validate()?;
        let k = config.num_models;
        Ok(Sqbc {
            beta: config.beta,
            t: 0,
            scaled_losses: vec![0.0; k],
            disagreement_counts: vec![vec![0; k]; k],
            accuracy: QueriedAccuracy::new(k),
            posterior_buf: vec![0.0; k],
            rng: DetRng::new(config.seed),
        })
    }

    /// Current committee posterior: softmax of the negated scaled losses.
    pub fn posterior(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.scaled_losses.len()];
        exp_weights_into(&mut out, &self.scaled_losses, 1.0);
        out
    }

    fn tally_disagreements(&mut self, predictions: &[ClassLabel]) {
        let k = predictions.len();
        for i in 0..k {
            for j in (i + 1)..k {
                if predictions[i] != predictions[j] {
                    self.disagreement_counts[i][j] += 1;
                    self.disagreement_counts[j][i] += 1;
                }
            }
        }
    }
}

impl SelectiveSampler for Sqbc {
    fn kind(&self) -> StrategyKind {
        StrategyKind::Sqbc
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
        let unanimous = all_agree(predictions);

        let q = if unanimous {
            0.0
        } else {
            self.tally_disagreements(predictions);
            let rounds_including_now = self.t + 1;
            exp_weights_into(&mut self.posterior_buf, &self.scaled_losses, 1.0);
            let i = self.rng.pick_weighted(&self.posterior_buf);
            let j = self.rng.pick_weighted(&self.posterior_buf);
            if i == j {
                0.0
            } else {
                self.disagreement_counts[i][j] as f64 / rounds_including_now as f64
            }
        };

        let queried = self.rng.bernoulli(q);
        if queried {
            let label = match oracle() {
                Ok(label) => label,
                Err(e) => {
                    // Undo this round entirely: pair draws, Bernoulli draw,
                    // and the disagreement tally must all be replayable.
                    self.rng.restore(rng_checkpoint);
                    if !unanimous {
                        let k = predictions.len();
                        for a in 0..k {
                            for b in (a + 1)..k {
                                if predictions[a] != predictions[b] {
                                    self.disagreement_counts[a][b] -= 1;
                                    self.disagreement_counts[b][a] -= 1;
                                }
                            }
                        }
                    }
                    return Err(e);
                }
            };
            self.accuracy.record(predictions, label);
            for (slot, &p) in self.scaled_losses.iter_mut().zip(predictions) {
                if p != label {
                    *slot += self.beta;
                }
            }
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
