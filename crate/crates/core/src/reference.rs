//! Trusted slow-path oracles and numeric bound checks.
//!
//! The naive recomputation here shares no shortcuts with the fast sampler:
//! loss accumulators are re-summed from the full query history every round
//! with compensated summation, and the weights are normalized raw
//! exponentials with no shifting. Agreement between the two paths is what
//! the equivalence tests certify. The rest of the module turns the
//! analytical statements behind the sampler (regret inequality, exponential
//! bound, mix-loss bound, estimator unbiasedness, KL-vs-variance expansion)
//! into numeric sweeps with pinned tolerances.
//!
//! The naive path is deliberately O(T²·k); it is meant for short horizons
//! (T ≤ a few hundred), where its unshifted exponents also stay far from
//! underflow.

use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::math::{ClassLabel, argmax_index, argmin_index, learning_rate};
use crate::rng::{self, DetRng, derive_seed};
use crate::strategy::{ModelPicker, SamplerConfig, SelectiveSampler};
use crate::stream::Stream;

/// Kahan compensated accumulator; the naive path's "extended precision".
#[derive(Debug, Clone, Copy, Default)]
struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum
    }
}

fn kahan_total<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = KahanSum::default();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// One recomputed round of the naive sampler.
#[derive(Debug, Clone, Serialize)]
pub struct NaiveRound {
    pub eta: f64,
    /// Normalized raw exponentials, no shift.
    pub weights: Vec<f64>,
    /// Argmax of the weights (the round's recommendation).
    pub recommendation: usize,
    /// Sampled from the weights; equals `recommendation` in forced mode,
    /// where no randomness is consumed.
    pub chosen_model: usize,
    pub query_probability: f64,
    pub queried: bool,
    /// The label that was bought, when one was.
    pub label: Option<ClassLabel>,
    /// Realized loss estimate ℓ̂_t: loss/q on queried rounds, zeros else.
    pub loss_estimate: Vec<f64>,
    /// Accumulators after the round, re-summed from the whole history.
    pub est_losses: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NaiveTrace {
    pub beta: f64,
    pub rounds: Vec<NaiveRound>,
}

/// Recorded outcome of one round, for replaying a fixed trace under a
/// different configuration with the probabilities recomputed.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ForcedOutcome {
    pub queried: bool,
    pub label: Option<ClassLabel>,
}

impl NaiveTrace {
    pub fn total_queries(&self) -> u64 {
        self.rounds.iter().filter(|r| r.queried).count() as u64
    }

    /// Lowest-index minimizer of the final accumulators.
    pub fn final_recommendation(&self) -> usize {
        argmin_index(&self.rounds.last().expect("empty trace").est_losses)
    }

    pub fn forced_outcomes(&self) -> Vec<ForcedOutcome> {
        self.rounds
            .iter()
            .map(|r| ForcedOutcome {
                queried: r.queried,
                label: r.label,
            })
            .collect()
    }
}

/// From-scratch recomputation of the exponential-weights sampler.
///
/// With `forced: None` it draws the model sample and the query coin from
/// the same generator recipe as the fast path, so a shared seed must
/// reproduce the fast path's decisions exactly. With `forced` outcomes it
/// consumes no randomness at all: query probabilities are recomputed for
/// the given `beta`, the recorded coin results and labels are replayed,
/// and the importance divisions use the recomputed probabilities.
pub fn naive_model_picker(
    stream: &Stream,
    beta: f64,
    seed: u64,
    forced: Option<&[ForcedOutcome]>,
) -> Result<NaiveTrace> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(CoreError::invalid(format!(
            "scale hyperparameter must be a nonnegative real, got {beta}"
        )));
    }
    if let Some(f) = forced {
        if f.len() != stream.len() {
            return Err(CoreError::invalid(format!(
                "{} forced outcomes for {} rounds",
                f.len(),
                stream.len()
            )));
        }
    }
    let k = stream.num_models();
    let num_classes = stream.num_classes() as usize;
    let mut rng = DetRng::new(seed);
    // Query history as (per-model 0-1 loss, probability); accumulators are
    // re-summed from it every round.
    let mut history: Vec<(Vec<u8>, f64)> = Vec::new();
    let mut rounds = Vec::with_capacity(stream.len());

    let resum = |history: &[(Vec<u8>, f64)]| -> Vec<f64> {
        (0..k)
            .map(|i| kahan_total(history.iter().map(|(loss, q)| f64::from(loss[i]) / q)))
            .collect()
    };

    for t0 in 0..stream.len() {
        let predictions = stream.row(t0);
        let eta = learning_rate(t0 as u64 + 1, k);
        let est_losses = resum(&history);
        let raw: Vec<f64> = est_losses.iter().map(|&l| (-eta * l).exp()).collect();
        let total = kahan_total(raw.iter().copied());
        let weights: Vec<f64> = raw.iter().map(|&w| w / total).collect();
        let recommendation = argmax_index(&weights);
        let chosen = match forced {
            None => rng.pick_weighted(&weights),
            Some(_) => recommendation,
        };

        let unanimous = predictions.iter().all(|&p| p == predictions[0]);
        let q = if unanimous {
            0.0
        } else {
            let mut variance: f64 = 0.0;
            for c in 0..num_classes {
                let mass = kahan_total(
                    predictions
                        .iter()
                        .zip(&weights)
                        .filter(|&(&p, _)| p as usize == c)
                        .map(|(_, &w)| w),
                );
                variance = variance.max(mass * (1.0 - mass));
            }
            (beta * variance.max(eta)).min(1.0)
        };

        let (queried, label) = match forced {
            None => {
                let queried = rng.bernoulli(q);
                let label = queried.then(|| stream.label(t0));
                (queried, label)
            }
            Some(outcomes) => {
                let outcome = outcomes[t0];
                if outcome.queried && q <= 0.0 {
                    return Err(CoreError::invalid(format!(
                        "round {} forces a query but the recomputed probability is 0",
                        t0 + 1
                    )));
                }
                if outcome.queried && outcome.label.is_none() {
                    return Err(CoreError::invalid(format!(
                        "round {} forces a query without a label",
                        t0 + 1
                    )));
                }
                (
                    outcome.queried,
                    outcome.queried.then(|| outcome.label.unwrap()),
                )
            }
        };

        let mut loss_estimate = vec![0.0; k];
        if queried {
            let label = label.unwrap();
            let loss: Vec<u8> = predictions.iter().map(|&p| u8::from(p != label)).collect();
            for (slot, &l) in loss_estimate.iter_mut().zip(&loss) {
                *slot = f64::from(l) / q;
            }
            history.push((loss, q));
        }

        rounds.push(NaiveRound {
            eta,
            weights,
            recommendation,
            chosen_model: chosen,
            query_probability: q,
            queried,
            label,
            loss_estimate,
            est_losses: resum(&history),
        });
    }

    Ok(NaiveTrace { beta, rounds })
}

/// Outcome of a numeric sweep against an analytic inequality.
#[derive(Debug, Clone, Serialize)]
pub struct LemmaCheckReport {
    pub description: String,
    pub grid_points: u64,
    pub tolerance: f64,
    /// Largest observed excess over the bound; ≤ 0 means the inequality
    /// held with margin everywhere.
    pub max_violation: f64,
    pub violating_point: Option<Vec<f64>>,
    pub passed: bool,
}

impl LemmaCheckReport {
    fn new(description: &str, tolerance: f64) -> Self {
        LemmaCheckReport {
            description: description.to_string(),
            grid_points: 0,
            tolerance,
            max_violation: f64::NEG_INFINITY,
            violating_point: None,
            passed: false,
        }
    }

    fn observe(&mut self, violation: f64, point: &[f64]) {
        self.grid_points += 1;
        if violation > self.max_violation {
            self.max_violation = violation;
            self.violating_point = Some(point.to_vec());
        }
    }

    fn finish(mut self) -> Self {
        self.passed = self.max_violation <= self.tolerance;
        if self.passed {
            self.violating_point = None;
        }
        self
    }
}

fn regret_term(x: f64, u: f64, eta: f64) -> f64 {
    eta * x + u * (x * (-eta / u).exp() + 1.0 - x).ln()
}

/// Sweeps the per-round regret inequality
///
///   f(x, u, η) = ηx + u·ln(x·e^{−η/u} + 1 − x) ≤ η²
///
/// for u = max(x(1−x), η) over an (x, η) grid in (0,1)×(0,1], and also
/// that f is nonincreasing in u on u ≥ η. `points_per_axis` sets the grid
/// density; tolerance is 1e-12.
pub fn check_regret_inequality(points_per_axis: usize) -> LemmaCheckReport {
    assert!(points_per_axis >= 2, "grid too coarse to mean anything");
    let n = points_per_axis;
    let mut report = LemmaCheckReport::new(
        "f(x,u,eta) = eta*x + u*ln(x*exp(-eta/u) + 1 - x) stays at or below \
         eta^2 at u = max(x(1-x), eta), and never increases in u >= eta",
        1e-12,
    );
    for i in 1..=n {
        let x = i as f64 / (n + 1) as f64;
        for j in 1..=n {
            let eta = j as f64 / n as f64;
            let u = (x * (1.0 - x)).max(eta);
            report.observe(regret_term(x, u, eta) - eta * eta, &[x, u, eta]);

            // Monotonicity probe: f sampled at increasing u from η up.
            let mut previous = regret_term(x, eta, eta);
            for m in 1..=5 {
                let u_m = eta + 0.25 * m as f64;
                let current = regret_term(x, u_m, eta);
                report.observe(current - previous, &[x, u_m, eta]);
                previous = current;
            }
        }
    }
    report.finish()
}

/// Sweeps 1 − (1−e^{−1})·x ≤ exp(−x²) over x ∈ [0,1] inclusive.
pub fn check_exp_bound(points: usize) -> LemmaCheckReport {
    assert!(points >= 2, "grid too coarse to mean anything");
    let mut report = LemmaCheckReport::new(
        "1 - (1 - exp(-1))*x stays at or below exp(-x^2) on [0, 1]",
        1e-12,
    );
    let slope = 1.0 - (-1.0f64).exp();
    for i in 0..=points {
        let x = i as f64 / points as f64;
        report.observe((1.0 - slope * x) - (-x * x).exp(), &[x]);
    }
    report.finish()
}

/// Mix-loss bound along one recomputed trace.
#[derive(Debug, Clone, Serialize)]
pub struct MixLossReport {
    /// M_T = Σ_t −(1/η_t)·ln⟨w_t, exp(−η_t·ℓ̂_t)⟩.
    pub total_mix_loss: f64,
    pub best_estimated_loss: f64,
    /// best + ln k / η_T.
    pub bound: f64,
    pub slack: f64,
    pub passed: bool,
}

/// Verifies M_T ≤ min_i L̂_{T,i} + ln k/η_T (tolerance 1e-9) along a naive
/// trace. Unqueried rounds contribute exactly zero mix loss because their
/// realized loss estimate is the zero vector.
pub fn check_mix_loss(trace: &NaiveTrace) -> MixLossReport {
    let last = trace.rounds.last().expect("empty trace");
    let k = last.est_losses.len();
    let mut total = KahanSum::default();
    for round in &trace.rounds {
        let inner = kahan_total(
            round
                .weights
                .iter()
                .zip(&round.loss_estimate)
                .map(|(&w, &l)| w * (-round.eta * l).exp()),
        );
        total.add(-inner.ln() / round.eta);
    }
    let total_mix_loss = total.value();
    let best = last.est_losses[argmin_index(&last.est_losses)];
    let bound = best + (k as f64).ln() / last.eta;
    MixLossReport {
        total_mix_loss,
        best_estimated_loss: best,
        bound,
        slack: bound - total_mix_loss,
        passed: total_mix_loss <= bound + 1e-9,
    }
}

/// Monte-Carlo check that the inverse-propensity accumulator is centered
/// on the true cumulative losses.
#[derive(Debug, Clone, Serialize)]
pub struct UnbiasednessReport {
    pub trials: u64,
    pub true_losses: Vec<f64>,
    /// Mean of L̂_{T,i} − L_{T,i} over the trials.
    pub mean_bias: Vec<f64>,
    pub standard_error: Vec<f64>,
}

impl UnbiasednessReport {
    /// Largest |mean bias| measured in standard errors; the acceptance
    /// threshold for "unbiased" is 3.
    pub fn max_sigma_distance(&self) -> f64 {
        self.mean_bias
            .iter()
            .zip(&self.standard_error)
            .map(|(&b, &se)| if se > 0.0 { b.abs() / se } else { b.abs() })
            .fold(0.0, f64::max)
    }
}

/// Runs the fast sampler `trials` times over one fixed stream (fresh seeds
/// derived from `base_seed`) and reports the empirical bias of the final
/// loss accumulators against the stream's true cumulative losses.
///
/// Rounds where every model errs identically are invisible to the
/// estimator (q = 0 there), so on streams containing such rounds the bias
/// is uniformly negative across models; on streams where some model is
/// correct each round the estimate is centered.
pub fn unbiasedness_estimate(
    stream: &Stream,
    beta: f64,
    trials: u64,
    base_seed: u64,
) -> Result<UnbiasednessReport> {
    assert!(trials >= 2, "need at least two trials for a spread");
    let k = stream.num_models();
    let true_losses: Vec<f64> = (0..k)
        .map(|i| {
            (0..stream.len())
                .map(|t| u64::from(stream.loss(t, i)))
                .sum::<u64>() as f64
        })
        .collect();

    let mut sum = vec![KahanSum::default(); k];
    let mut sum_sq = vec![KahanSum::default(); k];
    for trial in 0..trials {
        let seed = derive_seed(base_seed, &[rng::tag("unbiasedness"), trial]);
        let cfg = SamplerConfig::new(k, stream.num_classes(), beta, seed);
        let mut picker = ModelPicker::new(&cfg)?;
        for t in 0..stream.len() {
            let label = stream.label(t);
            let mut oracle = move || Ok(label);
            picker.step(stream.row(t), &mut oracle)?;
        }
        for (i, &est) in picker.estimated_losses().iter().enumerate() {
            let bias = est - true_losses[i];
            sum[i].add(bias);
            sum_sq[i].add(bias * bias);
        }
    }

    let n = trials as f64;
    let mean_bias: Vec<f64> = sum.iter().map(|s| s.value() / n).collect();
    let standard_error = sum_sq
        .iter()
        .zip(&mean_bias)
        .map(|(sq, &m)| {
            let variance = (sq.value() / n - m * m).max(0.0) * n / (n - 1.0);
            (variance / n).sqrt()
        })
        .collect();
    Ok(UnbiasednessReport {
        trials,
        true_losses,
        mean_bias,
        standard_error,
    })
}

/// Spot check of the second-order expansion linking the exponential-weights
/// update to the vote variance: with w₊ ∝ w·exp(−η·ℓ),
///
///   |2/η²·KL(w‖w₊) − Var_{i∼w}(ℓ_i)| ≤ η/(18√3) + η²/2
///
/// on random simplex points w, losses ℓ ∈ [0,1)^k, and η ∈ (0, 0.1].
pub fn kl_variance_spot_check(samples: u64, seed: u64) -> LemmaCheckReport {
    let mut report = LemmaCheckReport::new(
        "2/eta^2 * KL(w || w_plus) differs from the loss variance under w \
         by at most eta/(18*sqrt(3)) + eta^2/2, for eta <= 0.1",
        1e-12,
    );
    let mut rng = DetRng::new(seed);
    for _ in 0..samples {
        let k = 2 + rng.below(9);
        let mut w: Vec<f64> = (0..k).map(|_| rng.u01().max(1e-12)).collect();
        let total: f64 = w.iter().sum();
        for x in w.iter_mut() {
            *x /= total;
        }
        // η stays off the extreme low end: below ~1e-4 the KL term itself
        // cancels to the size of float noise and the comparison measures
        // rounding, not the expansion.
        let losses: Vec<f64> = (0..k).map(|_| rng.u01()).collect();
        let eta = 0.1 * rng.u01().max(1e-3);

        let mean: f64 = w.iter().zip(&losses).map(|(&wi, &li)| wi * li).sum();
        let second: f64 = w.iter().zip(&losses).map(|(&wi, &li)| wi * li * li).sum();
        let variance = second - mean * mean;
        let z: f64 = w
            .iter()
            .zip(&losses)
            .map(|(&wi, &li)| wi * (-eta * li).exp())
            .sum();
        let kl = eta * mean + z.ln();
        let bound = eta / (18.0 * 3.0f64.sqrt()) + 0.5 * eta * eta;
        let gap = (2.0 / (eta * eta) * kl - variance).abs();
        report.observe(gap - bound, &[eta, gap, bound]);
    }
    report.finish()
}
