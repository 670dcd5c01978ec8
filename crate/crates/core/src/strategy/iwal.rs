//! Importance-weighted active learning adapted to model ranking. Each
//! round keeps the set of "surviving" models whose importance-weighted
//! error rate is within a deviation threshold
//!
//!   θ_t = scale · √(2·ln(k·t·(t+1)) / t)
//!
//! of the best rate, queries with probability min(1, β) exactly when the
//! survivors disagree on the current instance, and on a query adds ℓ/q to
//! every model's weighted error sum.
//!
//! Sums are compared as per-round rates (sum divided by rounds seen) so
//! the shrinking threshold meets a quantity that settles instead of one
//! that grows with t.

use crate::error::Result;
use crate::math::{ClassLabel, QueryDecision, argmin_index};
use crate::rng::DetRng;

use super::{LabelOracle, RoundOutput, SamplerConfig, SelectiveSampler, StrategyKind};

#[derive(Debug, Clone)]
pub struct Iwal {
    beta: f64,
    threshold_scale: f64,
    t: u64,
    /// Importance-weighted error sums, one per model; ℓ/q per queried round.
    weighted_errors: Vec<f64>,
    /// Survivor mask used for the most recent round's decision.
    surviving: Vec<bool>,
    queries_made: u64,
    rng: DetRng,
}

impl Iwal {
    pub fn new(config: &SamplerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Iwal {
            beta: config.beta,
            threshold_scale: config.iwal_threshold_scale,
            t: 0,
            weighted_errors: vec![0.0; config.num_models],
            surviving: vec![true; config.num_models],
            queries_made: 0,
            rng: DetRng::new(config.seed),
        })
    }

    /// Size of the survivor set from the most recent round (all models
    /// before the first round).
    pub fn surviving_count(&self) -> usize {
        self.surviving.iter().filter(|&&s| s).count()
    }

    pub fn queries_made(&self) -> u64 {
        self.queries_made
    }

    /// Recomputes the survivor mask for round `t_now` (1-based). With no
    /// completed rounds every model survives; afterwards a model survives
    /// when its error rate is within θ of the best rate, so the current
    /// minimizer always survives.
    fn refresh_survivors(&mut self, t_now: u64) {
        if self.t == 0 {
            self.surviving.fill(true);
            return;
        }
        let k = self.weighted_errors.len() as u64;
        let theta = self.threshold_scale
            * (2.0 * ((k * t_now * (t_now + 1)) as f64).ln() / t_now as f64).sqrt();
        let rounds = self.t as f64;
        let best = self.weighted_errors[argmin_index(&self.weighted_errors)] / rounds;
        for (flag, &sum) in self.surviving.iter_mut().zip(&self.weighted_errors) {
            *flag = sum / rounds <= best + theta;
        }
    }

    fn survivors_disagree(&self, predictions: &[ClassLabel]) -> bool {
        let mut first: Option<ClassLabel> = None;
        for (i, &p) in predictions.iter().enumerate() {
            if !self.surviving[i] {
                continue;
            }
            match first {
                None => first = Some(p),
                Some(f) if f != p => return true,
                Some(_) => {}
            }
        }
        false
    }
}

impl SelectiveSampler for Iwal {
    fn kind(&self) -> StrategyKind {
        StrategyKind::Iwal
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
        self.refresh_survivors(self.t + 1);
        let q = if self.survivors_disagree(predictions) {
            self.beta.min(1.0)
        } else {
            0.0
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
            self.queries_made += 1;
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
