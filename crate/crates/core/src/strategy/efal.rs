//! Efficient active learning adapted to model ranking. The decision
//! statistic is the gap G between the two smallest importance-weighted
//! error rates. Against the decaying threshold
//!
//!   τ_t = c0            at t = 1,
//!   τ_t = c0·ln t/(t−1) afterwards,
//!
//! a gap at or below τ queries outright (q = 1); otherwise
//! q = min(1, (1/G² + 1/G)·τ). All-agree rounds never query. The constant
//! in front of the gap curve is fixed to 1; c0 is the tunable scale.

use crate::error::Result;
use crate::math::{ClassLabel, QueryDecision, argmin_index};
use crate::rng::DetRng;

use super::{LabelOracle, RoundOutput, SamplerConfig, SelectiveSampler, StrategyKind, all_agree};

#[derive(Debug, Clone)]
pub struct Efal {
    c0: f64,
    t: u64,
    /// Importance-weighted error sums, one per model; ℓ/q per queried round.
    weighted_errors: Vec<f64>,
    rng: DetRng,
}

/// τ_t for round `t_now` (1-based). ln 1 = 0 would void the very first
/// threshold, so round one uses the raw constant.
fn threshold(c0: f64, t_now: u64) -> f64 {
    if t_now <= 1 {
        c0
    } else {
        c0 * (t_now as f64).ln() / (t_now - 1) as f64
    }
}

/// Query probability for a leader gap `g` against threshold `tau`.
fn gap_probability(g: f64, tau: f64) -> f64 {
    if g <= tau {
        1.0
    } else {
        ((1.0 / (g * g) + 1.0 / g) * tau).min(1.0)
    }
}

impl Efal {
    pub fn new(config: &SamplerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Efal {
            c0: config.beta,
            t: 0,
            weighted_errors: vec![0.0; config.num_models],
            rng: DetRng::new(config.seed),
        })
    }

    /// Gap between the two smallest error rates (sums over rounds seen).
    fn leader_gap(&self) -> f64 {
        let mut best = f64::INFINITY;
        let mut second = f64::INFINITY;
        for &e in &self.weighted_errors {
            if e < best {
                second = best;
                best = e;
            } else if e < second {
                second = e;
            }
        }
        if self.t == 0 {
            0.0
        } else {
            (second - best) / self.t as f64
        }
    }
}

impl SelectiveSampler for Efal {
    fn kind(&self) -> StrategyKind {
        StrategyKind::Efal
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
        let recommendation = argmin_index(&self.weighted_errors);
        let q = if all_agree(predictions) {
            0.0
        } else {
            gap_probability(self.leader_gap(), threshold(self.c0, self.t + 1))
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
            for (sum, &p) in self.weighted_errors.iter_mut().zip(predictions) {
                if p != label {
                    *sum += 1.0 / q;
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
        argmin_index(&self.weighted_errors)
    }
}
