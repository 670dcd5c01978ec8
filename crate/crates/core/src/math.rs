//! Round-level primitives shared by the query strategies.
//!
//! Everything operates on plain slices; simplex and range invariants hold by
//! construction and are exercised by the property tests at the bottom of the
//! file. Preconditions (dimensions, positivity) are programmer errors and
//! panic rather than returning `Err`.

/// Class identifiers are dense non-negative integers; a value is only
/// meaningful relative to the pool or stream that produced it.
pub type ClassLabel = u32;

/// Outcome of one query decision: the probability that was used and the
/// realized coin flip. Probability zero forces `queried == false`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryDecision {
    pub probability: f64,
    pub queried: bool,
}

/// Learning rate for 1-based round `t` over `k` models: √(ln k / (2t)).
/// Horizon-free; decays like 1/√t. Natural logarithm throughout the crate.
///
/// Panics when `t == 0` or `k < 2` (ln k ≤ 0 degenerates the rate).
pub fn learning_rate(t: u64, num_models: usize) -> f64 {
    assert!(t >= 1, "rounds are 1-based");
    assert!(num_models >= 2, "need at least two models");
    ((num_models as f64).ln() / (2.0 * t as f64)).sqrt()
}

/// Zero-one loss of every model against a (possibly hypothetical) label:
/// entry i is 0 exactly when `predictions[i] == label`.
pub fn hypothetical_loss(predictions: &[ClassLabel], label: ClassLabel) -> Vec<u8> {
    predictions.iter().map(|&p| u8::from(p != label)).collect()
}

/// Weight mass landing on each class when model i votes its prediction with
/// weight `weights[i]`. Dense over `0..num_classes`; classes nobody predicts
/// get 0. Entries sum to the total weight mass (1 for a normalized input).
pub fn class_mass(predictions: &[ClassLabel], weights: &[f64], num_classes: u32) -> Vec<f64> {
    let mut mass = vec![0.0; num_classes as usize];
    class_mass_into(&mut mass, predictions, weights, num_classes);
    mass
}

pub(crate) fn class_mass_into(
    mass: &mut Vec<f64>,
    predictions: &[ClassLabel],
    weights: &[f64],
    num_classes: u32,
) {
    assert_eq!(
        predictions.len(),
        weights.len(),
        "one prediction per weight"
    );
    mass.clear();
    mass.resize(num_classes as usize, 0.0);
    for (&p, &w) in predictions.iter().zip(weights) {
        assert!(p < num_classes, "class id {p} out of range ({num_classes})");
        mass[p as usize] += w;
    }
}

/// Largest per-class vote variance, max over classes c of m_c(1 − m_c)
/// where m_c is the weight mass predicting c. Lives in [0, 0.25].
///
/// Unanimous rounds return 0 exactly: agreement is detected structurally
/// rather than through the float masses, so the "never query when every
/// model says the same thing" branch cannot be lost to rounding.
pub fn max_variance(predictions: &[ClassLabel], weights: &[f64], num_classes: u32) -> f64 {
    let mut mass = Vec::new();
    max_variance_into(&mut mass, predictions, weights, num_classes)
}

pub(crate) fn max_variance_into(
    mass: &mut Vec<f64>,
    predictions: &[ClassLabel],
    weights: &[f64],
    num_classes: u32,
) -> f64 {
    assert!(!predictions.is_empty(), "no models");
    if predictions.iter().all(|&p| p == predictions[0]) {
        return 0.0;
    }
    class_mass_into(mass, predictions, weights, num_classes);
    let mut v: f64 = 0.0;
    for &m in mass.iter() {
        v = v.max(m * (1.0 - m));
    }
    v
}

/// Query probability: 0 when the vote variance is 0 (unanimous round),
/// otherwise β·max(v, η) clipped to 1. The η floor keeps the inverse
/// propensities bounded; β rescales the whole term but never revives the
/// zero branch.
pub fn query_probability(variance: f64, eta: f64, beta: f64) -> f64 {
    assert!(
        (0.0..=0.25 + 1e-9).contains(&variance),
        "vote variance out of range: {variance}"
    );
    assert!(eta > 0.0, "learning rate must be positive");
    assert!(beta >= 0.0, "scale must be nonnegative");
    if variance == 0.0 {
        return 0.0;
    }
    (beta * variance.max(eta)).min(1.0)
}

/// Normalized exponential weights w_i ∝ exp(−η·L̂_i), computed against the
/// minimum accumulator entry so the exponents never underflow en masse:
/// after t rounds the raw entries can reach Σ 1/q_s, far past exp range.
///
/// Monotone for η > 0: a strictly smaller accumulator entry gets a strictly
/// larger weight. Panics on non-finite accumulator entries.
pub fn exp_weights(est_losses: &[f64], eta: f64) -> Vec<f64> {
    let mut w = Vec::new();
    exp_weights_into(&mut w, est_losses, eta);
    w
}

pub(crate) fn exp_weights_into(out: &mut Vec<f64>, est_losses: &[f64], eta: f64) {
    assert!(!est_losses.is_empty(), "no models");
    assert!(eta >= 0.0, "learning rate must be nonnegative");
    let mut min = f64::INFINITY;
    for &l in est_losses {
        assert!(l.is_finite(), "non-finite loss accumulator entry: {l}");
        min = min.min(l);
    }
    out.clear();
    out.extend(est_losses.iter().map(|&l| (-eta * (l - min)).exp()));
    let total: f64 = out.iter().sum();
    for w in out.iter_mut() {
        *w /= total;
    }
}

/// Adds the inverse-propensity estimate ℓ/q to the running totals. Only
/// call for rounds where the label was actually bought; `q` must be the
/// probability that produced the query. Panics when `q ≤ 0`.
pub fn importance_update(est_losses: &mut [f64], loss: &[u8], q: f64) {
    assert!(
        q > 0.0,
        "query probability must be positive on queried rounds"
    );
    assert_eq!(est_losses.len(), loss.len(), "one loss per model");
    for (acc, &l) in est_losses.iter_mut().zip(loss) {
        *acc += f64::from(l) / q;
    }
}

/// Smallest index attaining the maximum. Inputs must be finite and
/// non-empty; a NaN would silently corrupt every downstream decision, so
/// this panics instead.
pub fn argmax_index(values: &[f64]) -> usize {
    assert!(!values.is_empty(), "empty sequence");
    let mut best = 0;
    for (i, &x) in values.iter().enumerate() {
        assert!(x.is_finite(), "non-finite entry at index {i}");
        if x > values[best] {
            best = i;
        }
    }
    best
}

/// Smallest index attaining the minimum; same contract as [`argmax_index`].
pub fn argmin_index(values: &[f64]) -> usize {
    assert!(!values.is_empty(), "empty sequence");
    let mut best = 0;
    for (i, &x) in values.iter().enumerate() {
        assert!(x.is_finite(), "non-finite entry at index {i}");
        if x < values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn assert_close(actual: f64, expected: f64, tol: f64) {
        assert!(
            (actual - expected).abs() <= tol,
            "expected {expected}, got {actual}"
        );
    }

    #[test]
    fn learning_rate_matches_hand_computed_values() {
        assert_close(learning_rate(1, 2), 0.588_705_011_257_737_3, 1e-12);
        assert_close(learning_rate(50, 10), 0.151_742_712_938_514_25, 1e-12);
    }

    #[test]
    fn learning_rate_halves_when_rounds_quadruple() {
        for (t, k) in [(1u64, 2usize), (10, 5), (250, 17)] {
            assert_close(learning_rate(4 * t, k), learning_rate(t, k) / 2.0, 1e-15);
        }
    }

    #[test]
    #[should_panic(expected = "at least two models")]
    fn learning_rate_rejects_single_model() {
        learning_rate(1, 1);
    }

    #[test]
    fn hypothetical_loss_marks_mismatches() {
        assert_eq!(hypothetical_loss(&[0, 1], 0), vec![0, 1]);
        assert_eq!(hypothetical_loss(&[0, 0, 0], 0), vec![0, 0, 0]);
        assert_eq!(hypothetical_loss(&[0, 1, 2], 3), vec![1, 1, 1]);
    }

    #[test]
    fn class_mass_accumulates_votes() {
        let mass = class_mass(&[0, 0, 1], &[0.5, 0.3, 0.2], 3);
        assert_close(mass[0], 0.8, 1e-15);
        assert_close(mass[1], 0.2, 1e-15);
        assert_close(mass[2], 0.0, 0.0);
    }

    #[test]
    fn max_variance_matches_hand_computed_values() {
        assert_close(max_variance(&[0, 1], &[0.5, 0.5], 2), 0.25, 1e-15);
        assert_close(
            max_variance(&[0, 0, 1], &[0.5, 0.3, 0.2], 2),
            0.8 * 0.2,
            1e-15,
        );
    }

    #[test]
    fn max_variance_is_exactly_zero_on_unanimous_rounds() {
        // Weights that do not sum to exactly 1.0 must not leak a tiny
        // nonzero variance through rounding.
        let w = [0.1 + 0.2, 0.3, 0.4 - 1e-17];
        assert_eq!(max_variance(&[2, 2, 2], &w, 3), 0.0);
    }

    #[test]
    fn query_probability_floors_scales_and_clips() {
        assert_close(query_probability(0.16, 0.1, 1.0), 0.16, 1e-15);
        assert_eq!(query_probability(0.0, 0.3, 5.0), 0.0);
        assert_close(query_probability(0.02, 0.1, 20.0), 1.0, 0.0);
        // Floor binds when the vote variance dips below η.
        assert_close(query_probability(0.01, 0.3, 1.0), 0.3, 1e-15);
    }

    #[test]
    fn exp_weights_matches_hand_computed_values() {
        let w = exp_weights(&[0.0, 0.0, 0.0], 0.7);
        for &x in &w {
            assert_close(x, 1.0 / 3.0, 1e-15);
        }
        let w = exp_weights(&[0.0, 1.0], std::f64::consts::LN_2);
        assert_close(w[0], 2.0 / 3.0, 1e-15);
        assert_close(w[1], 1.0 / 3.0, 1e-15);
    }

    #[test]
    fn exp_weights_survives_huge_accumulators() {
        let w = exp_weights(&[0.0, 1000.0], 1.0);
        assert!(w[0] > 0.999_999);
        assert!(w[1] >= 0.0 && w[1] < 1e-300);
        assert!(w.iter().all(|x| x.is_finite()));

        let w = exp_weights(&[5e8, 5e8 + 3.0], 0.01);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w[0] > w[1]);
    }

    #[test]
    fn importance_update_divides_by_the_propensity() {
        let mut acc = vec![0.0, 0.0];
        importance_update(&mut acc, &[0, 1], 0.25);
        assert_eq!(acc, vec![0.0, 4.0]);

        let mut acc = vec![2.0, 3.0];
        importance_update(&mut acc, &[0, 0], 0.5);
        assert_eq!(acc, vec![2.0, 3.0]);

        let mut acc = vec![1.0, 1.0];
        importance_update(&mut acc, &[1, 1], 1.0);
        assert_eq!(acc, vec![2.0, 2.0]);
    }

    #[test]
    #[should_panic(expected = "must be positive")]
    fn importance_update_rejects_zero_propensity() {
        importance_update(&mut [0.0], &[1], 0.0);
    }

    #[test]
    fn argmax_and_argmin_break_ties_low() {
        assert_eq!(argmax_index(&[0.2, 0.5, 0.3]), 1);
        assert_eq!(argmax_index(&[0.5, 0.5]), 0);
        assert_eq!(argmax_index(&[-1.0, -2.0]), 0);
        assert_eq!(argmin_index(&[0.5, 0.2, 0.2]), 1);
    }

    #[test]
    #[should_panic(expected = "non-finite")]
    fn argmax_rejects_nan() {
        argmax_index(&[0.1, f64::NAN]);
    }

    /// E[ℓ/q·Q] = ℓ for Q ∼ Ber(q): Monte-Carlo check of the increment.
    #[test]
    fn importance_increment_is_unbiased() {
        let mut rng = crate::rng::DetRng::new(2024);
        let q = 0.3;
        let draws = 100_000u64;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..draws {
            let inc = if rng.bernoulli(q) { 1.0 / q } else { 0.0 };
            sum += inc;
            sum_sq += inc * inc;
        }
        let n = draws as f64;
        let mean = sum / n;
        let var = (sum_sq - n * mean * mean) / (n - 1.0);
        let se = (var / n).sqrt();
        assert!(
            (mean - 1.0).abs() <= 3.0 * se,
            "bias {} exceeds 3 standard errors ({se})",
            mean - 1.0
        );
    }

    fn weights_strategy(k: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(1e-6..1.0f64, k).prop_map(|raw| {
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|x| x / total).collect()
        })
    }

    proptest! {
        #[test]
        fn variance_stays_in_range_and_ignores_model_order(
            (preds, weights, rot) in (2usize..8).prop_flat_map(|k| (
                prop::collection::vec(0u32..5, k),
                weights_strategy(k),
                0..k,
            ))
        ) {
            let v = max_variance(&preds, &weights, 5);
            prop_assert!((0.0..=0.25 + 1e-12).contains(&v));

            let mut p2 = preds.clone();
            let mut w2 = weights.clone();
            p2.rotate_left(rot);
            w2.rotate_left(rot);
            let v2 = max_variance(&p2, &w2, 5);
            prop_assert!((v - v2).abs() <= 1e-12);
        }

        #[test]
        fn variance_ignores_class_relabeling(
            (preds, weights) in (2usize..8).prop_flat_map(|k| (
                prop::collection::vec(0u32..5, k),
                weights_strategy(k),
            ))
        ) {
            // Any bijection on class ids permutes the mass vector, leaving
            // the max variance unchanged. Reverse the id space: c → 4 − c.
            let relabeled: Vec<u32> = preds.iter().map(|&c| 4 - c).collect();
            let v1 = max_variance(&preds, &weights, 5);
            let v2 = max_variance(&relabeled, &weights, 5);
            prop_assert!((v1 - v2).abs() <= 1e-12);
        }

        #[test]
        fn variance_is_positive_given_a_weighted_disagreement(
            (preds, weights) in (2usize..8).prop_flat_map(|k| (
                prop::collection::vec(0u32..5, k),
                weights_strategy(k),
            ))
        ) {
            let unanimous = preds.iter().all(|&p| p == preds[0]);
            let v = max_variance(&preds, &weights, 5);
            // All weights are strictly positive here, so disagreement must
            // surface as strictly positive variance; unanimity as exact 0.
            if unanimous {
                prop_assert_eq!(v, 0.0);
            } else {
                prop_assert!(v > 0.0);
            }
        }

        #[test]
        fn exp_weights_form_a_simplex_and_shift_invariantly(
            (losses, eta, shift) in (2usize..10).prop_flat_map(|k| (
                prop::collection::vec(0.0..1e4f64, k),
                1e-3..1.0f64,
                0.0..1e4f64,
            ))
        ) {
            let w = exp_weights(&losses, eta);
            prop_assert!(w.iter().all(|&x| (0.0..=1.0).contains(&x)));
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);

            let shifted: Vec<f64> = losses.iter().map(|&l| l + shift).collect();
            let w2 = exp_weights(&shifted, eta);
            for (a, b) in w.iter().zip(&w2) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn best_weight_is_the_smallest_accumulator_entry(
            (losses, eta) in (2usize..10).prop_flat_map(|k| (
                prop::collection::vec(0.0..100.0f64, k),
                1e-3..1.0f64,
            ))
        ) {
            let w = exp_weights(&losses, eta);
            prop_assert_eq!(argmax_index(&w), argmin_index(&losses));
        }

        #[test]
        fn query_probability_respects_the_floor(
            v in 1e-9..0.25f64,
            eta in 1e-3..1.0f64,
        ) {
            prop_assert!(query_probability(v, eta, 1.0) >= eta.min(1.0) - 1e-15);
        }
    }
}
