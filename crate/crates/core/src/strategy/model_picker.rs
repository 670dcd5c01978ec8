//! Exponential-weights selective sampler driven by vote variance.
//!
//! Round t (1-based): with η_t = √(ln k / 2t) and L̂ the running
//! importance-weighted loss estimates,
//!
//!   w_t ∝ exp(−η_t·L̂),   recommend argmax w_t,   sample I_t ∼ w_t,
//!   q_t = 0 if the vote is unanimous, else min(1, β·max(v_t, η_t))
//!   with v_t = max_c (vote mass for c)(1 − vote mass for c),
//!
//! and on Q_t ∼ Ber(q_t) = 1 buy the label and add ℓ_t/q_t to L̂. The η_t
//! floor keeps the inverse propensities bounded; the unanimous branch keeps
//! budget off rounds that cannot rank the models.

use crate::error::Result;
use crate::math::{
    self, ClassLabel, QueryDecision, argmax_index, argmin_index, hypothetical_loss,
    importance_update, learning_rate,
};
use crate::rng::DetRng;

use super::{LabelOracle, RoundOutput, SamplerConfig, SelectiveSampler, StrategyKind};

/// See the module docs. State is (t, L̂, rng); the weight and vote-mass
/// buffers are just scratch reused across rounds.
#[derive(Debug, Clone)]
pub struct ModelPicker {
    beta: f64,
    num_classes: u32,
    /// Predict with the recommendation instead of sampling I_t from w_t.
    /// The per-round sampling draw is consumed either way, so the query
    /// sequence for a seed is identical across the two modes.
    follow_leader: bool,
    t: u64,
    est_losses: Vec<f64>,
    weights: Vec<f64>,
    mass: Vec<f64>,
    rng: DetRng,
}

impl ModelPicker {
    pub fn new(config: &SamplerConfig) -> Result<Self> {
        config.validate()?;
        Ok(ModelPicker {
            beta: config.beta,
            num_classes: config.num_classes,
            follow_leader: config.follow_leader,
            t: 0,
            est_losses: vec![0.0; config.num_models],
            weights: Vec::with_capacity(config.num_models),
            mass: Vec::new(),
            rng: DetRng::new(config.seed),
        })
    }

    /// Running loss estimates L̂; the weights for round t+1 are
    /// `exp_weights(estimated_losses(), learning_rate(t+1, k))`.
    pub fn estimated_losses(&self) -> &[f64] {
        &self.est_losses
    }
}

impl SelectiveSampler for ModelPicker {
    fn kind(&self) -> StrategyKind {
        StrategyKind::ModelPicker
    }

    fn rounds_seen(&self) -> u64 {
        self.t
    }

    fn step(
        &mut self,
        predictions: &[ClassLabel],
        oracle: LabelOracle<'_>,
    ) -> Result<(RoundOutput, usize)> {
        assert_eq!(predictions.len(), self.est_losses.len(), "wrong arity");
        let rng_checkpoint = self.rng.snapshot();
        let t = self.t + 1;
        let eta = learning_rate(t, self.est_losses.len());
        math::exp_weights_into(&mut self.weights, &self.est_losses, eta);
        let recommendation = argmax_index(&self.weights);
        let sampled = self.rng.pick_weighted(&self.weights);
        let chosen = if self.follow_leader {
            recommendation
        } else {
            sampled
        };

        let variance =
            math::max_variance_into(&mut self.mass, predictions, &self.weights, self.num_classes);
        let q = math::query_probability(variance, eta, self.beta);
        let queried = self.rng.bernoulli(q);
        if queried {
            let label = match oracle() {
                Ok(label) => label,
                Err(e) => {
                    self.rng.restore(rng_checkpoint);
                    return Err(e);
                }
            };
            let loss = hypothetical_loss(predictions, label);
            importance_update(&mut self.est_losses, &loss, q);
        }
        self.t = t;

        Ok((
            RoundOutput {
                predicted_label: predictions[chosen],
                chosen_model: chosen,
                decision: QueryDecision {
                    probability: q,
                    queried,
                },
            },
            recommendation,
        ))
    }

    /// Argmax of the weights; since the weights order inversely to L̂ for
    /// any positive learning rate, this is the lowest-index minimizer of
    /// the loss estimates.
    fn recommend(&self) -> usize {
        argmin_index(&self.est_losses)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::synth_iid;

    fn config(k: usize, num_classes: u32, beta: f64, seed: u64) -> SamplerConfig {
        SamplerConfig::new(k, num_classes, beta, seed)
    }

    #[test]
    fn first_round_floors_the_query_probability_at_eta() {
        // t=1, k=2, uniform weights, split vote: v = 0.25 < η_1 ≈ 0.5887.
        let mut picker = ModelPicker::new(&config(2, 2, 1.0, 7)).unwrap();
        let mut oracle = || Ok(0);
        let (out, recommendation) = picker.step(&[0, 1], &mut oracle).unwrap();
        assert!((out.decision.probability - 0.588_705_011_257_737_3).abs() < 1e-12);
        assert_eq!(recommendation, 0, "uniform weights tie-break low");
    }

    #[test]
    fn queries_update_the_loss_estimates_by_inverse_propensity() {
        let mut picker = ModelPicker::new(&config(2, 2, 1.0, 3)).unwrap();
        let mut queried_q = None;
        // Step rounds until one queries; label 0 penalizes model 1 only.
        for _ in 0..50 {
            let mut oracle = || Ok(0);
            let (out, _) = picker.step(&[0, 1], &mut oracle).unwrap();
            if out.decision.queried {
                queried_q = Some(out.decision.probability);
                break;
            }
        }
        let q = queried_q.expect("no query in 50 split rounds");
        assert_eq!(picker.estimated_losses()[0], 0.0);
        assert!((picker.estimated_losses()[1] - 1.0 / q).abs() < 1e-12);
        assert_eq!(picker.recommend(), 0);
    }

    #[test]
    fn beta_zero_never_queries() {
        let stream = synth_iid(&[0.8, 0.5], 2, 300, 13).unwrap();
        let mut picker = ModelPicker::new(&config(2, 2, 0.0, 1)).unwrap();
        for t in 0..stream.len() {
            let mut oracle = || panic!("β = 0 must never query");
            let (out, _) = picker.step(stream.row(t), &mut oracle).unwrap();
            assert_eq!(out.decision.probability, 0.0);
        }
        assert_eq!(picker.recommend(), 0, "no evidence, uniform tie");
    }

    #[test]
    fn follow_leader_mode_predicts_the_recommendation() {
        let stream = synth_iid(&[0.9, 0.3, 0.5], 3, 400, 29).unwrap();
        let mut cfg = config(3, 3, 1.0, 4);
        cfg.follow_leader = true;
        let mut picker = ModelPicker::new(&cfg).unwrap();
        for t in 0..stream.len() {
            let label = stream.label(t);
            let mut oracle = move || Ok(label);
            let (out, recommendation) = picker.step(stream.row(t), &mut oracle).unwrap();
            assert_eq!(out.chosen_model, recommendation);
        }
        assert_eq!(picker.recommend(), 0);
    }

    #[test]
    fn follow_leader_and_sampled_runs_share_the_query_sequence() {
        let stream = synth_iid(&[0.75, 0.55], 2, 200, 17).unwrap();
        let base = config(2, 2, 1.0, 88);
        let mut leader_cfg = base.clone();
        leader_cfg.follow_leader = true;
        let mut a = ModelPicker::new(&base).unwrap();
        let mut b = ModelPicker::new(&leader_cfg).unwrap();
        for t in 0..stream.len() {
            let label = stream.label(t);
            let mut oa = move || Ok(label);
            let mut ob = move || Ok(label);
            let (out_a, _) = a.step(stream.row(t), &mut oa).unwrap();
            let (out_b, _) = b.step(stream.row(t), &mut ob).unwrap();
            assert_eq!(out_a.decision, out_b.decision);
        }
    }
}
