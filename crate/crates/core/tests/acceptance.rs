//! Release gate: eleven end-to-end checks covering regret, query growth,
//! identification, the reference inequalities, estimator bias, budget
//! matching, baseline dominance, the greedy variant, and determinism.
//!
//! Each check prints one `acceptance NN PASS|FAIL` line (visible under
//! `--nocapture`) and asserts on the same condition, so the test names in
//! ordinary `cargo test` output double as the checklist. Every tolerance
//! is pinned next to its assertion.

use std::sync::OnceLock;

use streampicker_core::harness::{
    EvalSpec, StreamFamily, SummaryRow, evaluate, run_realization, write_jsonl, write_summary_csv,
};
use streampicker_core::rng::{DetRng, EVAL_TAG, derive_seed};
use streampicker_core::strategy::{ModelPicker, SamplerConfig, SelectiveSampler, StrategyKind};
use streampicker_core::stream::synth_iid;
use streampicker_core::tuning::{GridPoint, choose_beta, tuning_table};
use streampicker_core::{
    Stream, check_exp_bound, check_regret_inequality, exp_weights, learning_rate,
    naive_model_picker, unbiasedness_estimate,
};

const BASE_SEED: u64 = 61;
const GREEDY_SEED: u64 = 62;
const RUNS: usize = 500;

/// Two models with a 0.3 accuracy gap on binary labels: the workhorse
/// instance for the horizon sweeps.
fn two_model_family(len: usize) -> StreamFamily {
    StreamFamily::SynthIid {
        accuracies: vec![0.9, 0.6],
        num_classes: 2,
        len,
    }
}

/// Ten models evenly spread over [0.55, 0.92] on ten classes: a crowded
/// field with a 0.041 gap at the top, used for the budget and dominance
/// checks.
fn spread_family(len: usize) -> StreamFamily {
    let accuracies: Vec<f64> = (0..10).map(|i| 0.55 + 0.37 * i as f64 / 9.0).collect();
    StreamFamily::SynthIid {
        accuracies,
        num_classes: 10,
        len,
    }
}

/// Per-realization prefix statistics at the given checkpoints.
struct CheckpointStats {
    queries: Vec<u64>,
    identified: Vec<bool>,
    losses: Vec<i64>,
}

/// Runs the picker over `RUNS` realizations of a family and reduces each
/// trace to checkpoint statistics. Seeds follow the evaluation recipe, so
/// these runs are replicas of what `evaluate` would execute.
fn picker_batch(
    family: &StreamFamily,
    base: u64,
    follow_leader: bool,
    checkpoints: &[usize],
) -> Vec<CheckpointStats> {
    use rayon::prelude::*;
    (0..RUNS as u64)
        .into_par_iter()
        .map(|r| {
            let stream = family.realize(base, EVAL_TAG, r).unwrap();
            let seed = derive_seed(base, &[EVAL_TAG, r, StrategyKind::ModelPicker.seed_tag()]);
            let mut config =
                SamplerConfig::new(family.num_models(), family.num_classes(), 1.0, seed);
            config.follow_leader = follow_leader;
            let trace = run_realization(&stream, StrategyKind::ModelPicker, &config).unwrap();
            let mut queries = Vec::with_capacity(checkpoints.len());
            let mut identified = Vec::with_capacity(checkpoints.len());
            let mut losses = Vec::with_capacity(checkpoints.len());
            for &t in checkpoints {
                queries.push(trace.rounds[..t].iter().filter(|r| r.queried).count() as u64);
                let rec = if t == stream.len() {
                    trace.final_recommendation
                } else {
                    trace.rounds[t].recommendation
                };
                let counts = stream.correct_counts(t);
                identified.push(counts[rec] == *counts.iter().max().unwrap());
                losses.push(
                    trace.rounds[..t]
                        .iter()
                        .map(|r| i64::from(r.learner_loss))
                        .sum(),
                );
            }
            CheckpointStats {
                queries,
                identified,
                losses,
            }
        })
        .collect()
}

/// Sampled-mode picker runs on the two-model instance at T = 2000, shared
/// by the query-growth and identification checks.
fn two_model_runs() -> &'static [CheckpointStats] {
    static RUNS_CELL: OnceLock<Vec<CheckpointStats>> = OnceLock::new();
    RUNS_CELL.get_or_init(|| {
        picker_batch(
            &two_model_family(2000),
            BASE_SEED,
            false,
            &[250, 500, 1000, 2000],
        )
    })
}

const TWO_MODEL_CHECKPOINTS: [usize; 4] = [250, 500, 1000, 2000];

/// Budget-matching tables on the spread instance, shared by the budget and
/// dominance checks: 250 grid points, 100 tuning realizations each.
fn spread_tables() -> &'static [(StrategyKind, Vec<GridPoint>)] {
    static TABLES: OnceLock<Vec<(StrategyKind, Vec<GridPoint>)>> = OnceLock::new();
    TABLES.get_or_init(|| {
        let family = spread_family(1000);
        [
            (StrategyKind::ModelPicker, 0.0, 3.0),
            (StrategyKind::VoteEntropy, 0.0, 1.0),
            (StrategyKind::Sqbc, 0.0, 2.0),
        ]
        .into_iter()
        .map(|(kind, lo, hi)| {
            (
                kind,
                tuning_table(kind, &family, lo, hi, 250, 100, BASE_SEED).unwrap(),
            )
        })
        .collect()
    })
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Ratio of means over paired samples, with a delta-method standard error
/// that keeps the (here strongly positive) covariance term.
fn paired_ratio(numerators: &[f64], denominators: &[f64]) -> (f64, f64) {
    let n = numerators.len() as f64;
    let (mb, sb) = mean_sd(numerators);
    let (ma, sa) = mean_sd(denominators);
    let ratio = mb / ma;
    let cov = numerators
        .iter()
        .zip(denominators)
        .map(|(&b, &a)| (b - mb) * (a - ma))
        .sum::<f64>()
        / (n - 1.0);
    let var = (sb * sb + ratio * ratio * sa * sa - 2.0 * ratio * cov) / (n * ma * ma);
    (ratio, var.max(0.0).sqrt())
}

fn report(number: u32, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("acceptance {number:02} {verdict} {detail}");
    assert!(pass, "acceptance {number:02} failed: {detail}");
}

#[test]
fn acceptance_01_mean_regret_stays_under_the_square_root_bound() {
    let family = spread_family(1000);
    let mut spec = EvalSpec::new(StrategyKind::ModelPicker, 1.0, 0);
    spec.realizations = RUNS as u64;
    spec.base_seed = BASE_SEED;
    let out = evaluate(&family, &spec).unwrap();
    let regrets: Vec<f64> = out.rows.iter().map(|r| r.final_regret as f64).collect();
    let (mean, sd) = mean_sd(&regrets);
    let se = sd / (RUNS as f64).sqrt();
    let bound = 2.0 * (2.0 * 1000.0 * 10f64.ln()).sqrt();
    report(
        1,
        mean + 3.0 * se <= bound,
        &format!(
            "mean regret {mean:.2} + 3se {:.2} <= 2*sqrt(2*1000*ln 10) = {bound:.1}",
            3.0 * se
        ),
    );
}

#[test]
fn acceptance_02_query_growth_is_sublinear() {
    let runs = two_model_runs();
    let mut detail = String::new();
    let mut pass = true;

    // Worst-case ceiling first: sqrt(2 T ln k) * (1 + 4C/gap) with the
    // instance's known 0.3 accuracy gap. The doubling ratios below are the
    // informative part; this keeps the absolute level honest too.
    for (i, &t) in TWO_MODEL_CHECKPOINTS.iter().enumerate().skip(1) {
        let qs: Vec<f64> = runs.iter().map(|r| r.queries[i] as f64).collect();
        let (mean, _) = mean_sd(&qs);
        let ceiling = (2.0 * t as f64 * 2f64.ln()).sqrt() * (1.0 + 4.0 * 2.0 / 0.3);
        pass &= mean <= ceiling;
        detail.push_str(&format!("T={t}: {mean:.1} (cap {ceiling:.0}); "));
    }

    // Doubling the horizon should multiply the query count by well under
    // 2; the sqrt-like growth predicts about 1.4, gated at 1.6 plus noise.
    for pair in [(1usize, 2usize), (2, 3)] {
        let a: Vec<f64> = runs.iter().map(|r| r.queries[pair.0] as f64).collect();
        let b: Vec<f64> = runs.iter().map(|r| r.queries[pair.1] as f64).collect();
        let (ratio, se) = paired_ratio(&b, &a);
        pass &= ratio <= 1.6 + 3.0 * se;
        detail.push_str(&format!(
            "x{}/x{}: {ratio:.3} (limit {:.3}); ",
            TWO_MODEL_CHECKPOINTS[pair.1],
            TWO_MODEL_CHECKPOINTS[pair.0],
            1.6 + 3.0 * se
        ));
    }
    report(2, pass, detail.trim_end_matches("; "));
}

#[test]
fn acceptance_03_identification_improves_with_horizon() {
    let runs = two_model_runs();
    let n = RUNS as f64;
    let rates: Vec<f64> = (0..TWO_MODEL_CHECKPOINTS.len())
        .map(|i| runs.iter().filter(|r| r.identified[i]).count() as f64 / n)
        .collect();

    let mut pass = rates[3] >= 0.95;
    // Monotone up to two standard errors of the paired difference, with a
    // 2/n floor so a single flipped realization cannot fail the check.
    for w in rates.windows(2) {
        let slack = (2.0 * ((w[0] * (1.0 - w[0]) + w[1] * (1.0 - w[1])) / n).sqrt()).max(2.0 / n);
        pass &= w[1] + slack >= w[0];
    }
    report(
        3,
        pass,
        &format!(
            "identification at T=250/500/1000/2000: {:.3}/{:.3}/{:.3}/{:.3} (final >= 0.95, nondecreasing)",
            rates[0], rates[1], rates[2], rates[3]
        ),
    );
}

#[test]
fn acceptance_04_alternating_stream_keeps_full_query_pressure() {
    let checkpoints = [200usize, 400, 800];
    let runs = picker_batch(
        &StreamFamily::Alternating { len: 800 },
        BASE_SEED,
        false,
        &checkpoints,
    );
    let mut detail = String::new();
    let mut pass = true;
    for (i, &t) in checkpoints.iter().enumerate() {
        let rate = runs.iter().map(|r| r.queries[i] as f64).sum::<f64>() / (RUNS * t) as f64;
        pass &= rate >= 0.15;
        detail.push_str(&format!("rate at T={t}: {rate:.3}; "));
    }
    report(4, pass, &format!("{}(floor 0.15)", detail));
}

#[test]
fn acceptance_05_scalar_inequalities_hold_on_dense_grids() {
    let regret = check_regret_inequality(1000);
    let exp = check_exp_bound(1_000_000);
    report(
        5,
        regret.passed && exp.passed,
        &format!(
            "regret term: max excess {:.2e} over {} points; linear-vs-gaussian: max excess {:.2e} over {} points (tolerance 1e-12)",
            regret.max_violation, regret.grid_points, exp.max_violation, exp.grid_points
        ),
    );
}

#[test]
fn acceptance_06_fast_sampler_matches_the_naive_reference() {
    // 100 fresh random instances, disjoint from the unit-test sweep.
    let mut meta = DetRng::new(2026);
    let mut worst_rel = 0.0f64;
    let mut rounds_checked = 0u64;
    for trial in 0..100u64 {
        let k = 2 + meta.below(9);
        let num_classes = 2 + meta.below(4) as u32;
        let len = 50 + meta.below(151);
        let accuracies: Vec<f64> = (0..k).map(|_| 0.3 + 0.65 * meta.u01()).collect();
        let stream_seed = derive_seed(BASE_SEED, &[trial, 0]);
        let shared_seed = derive_seed(BASE_SEED, &[trial, 1]);
        let beta = [0.5, 1.0, 2.0][meta.below(3)];
        let stream = synth_iid(&accuracies, num_classes, len, stream_seed).unwrap();

        let naive = naive_model_picker(&stream, beta, shared_seed, None).unwrap();
        let cfg = SamplerConfig::new(k, num_classes, beta, shared_seed);
        let mut picker = ModelPicker::new(&cfg).unwrap();
        for (t, reference) in naive.rounds.iter().enumerate() {
            let weights = exp_weights(picker.estimated_losses(), learning_rate(t as u64 + 1, k));
            for (&a, &b) in weights.iter().zip(&reference.weights) {
                let rel = (a - b).abs() / a.max(b);
                worst_rel = worst_rel.max(rel);
                assert!(rel <= 1e-9, "trial {trial} round {t}: weights {a} vs {b}");
            }
            let label = stream.label(t);
            let mut oracle = move || Ok(label);
            let (out, rec) = picker.step(stream.row(t), &mut oracle).unwrap();
            assert_eq!(
                out.chosen_model, reference.chosen_model,
                "trial {trial} round {t}"
            );
            assert_eq!(
                out.decision.queried, reference.queried,
                "trial {trial} round {t}"
            );
            assert_eq!(rec, reference.recommendation, "trial {trial} round {t}");
            assert!(
                (out.decision.probability - reference.query_probability).abs() <= 1e-9,
                "trial {trial} round {t}"
            );
            rounds_checked += 1;
        }
    }
    report(
        6,
        true,
        &format!(
            "100 instances, {rounds_checked} rounds: decisions identical, worst weight deviation {worst_rel:.2e} (limit 1e-9)"
        ),
    );
}

#[test]
fn acceptance_07_loss_estimates_are_unbiased() {
    // Disagreement on every round with one always-correct model: labels
    // cycle the three classes, model 0 echoes the label, models 1 and 2
    // shift it. Every round is queryable and no loss event is invisible,
    // so the importance-weighted accumulators must be centered.
    let len = 60usize;
    let labels: Vec<u32> = (0..len as u32).map(|t| t % 3).collect();
    let mut predictions = Vec::with_capacity(len * 3);
    for &label in &labels {
        predictions.push(label);
        predictions.push((label + 1) % 3);
        predictions.push((label + 2) % 3);
    }
    let stream = Stream::from_parts(3, 3, labels, predictions).unwrap();
    let rep = unbiasedness_estimate(&stream, 1.0, 10_000, BASE_SEED).unwrap();
    let sigma = rep.max_sigma_distance();
    report(
        7,
        sigma <= 3.0,
        &format!("10000 trials: worst bias {sigma:.2} standard errors (limit 3)"),
    );
}

#[test]
fn acceptance_08_tuned_scales_hit_their_budgets() {
    let family = spread_family(1000);
    let mut detail = String::new();
    let mut pass = true;
    for (kind, table) in spread_tables() {
        for budget in [50u64, 100, 200] {
            let (idx, saturated) = choose_beta(table, budget, 100);
            let beta = table[idx].beta;
            let mut spec = EvalSpec::new(*kind, beta, budget);
            spec.realizations = 100;
            spec.base_seed = BASE_SEED;
            let out = evaluate(&family, &spec).unwrap();
            let mean = out.summary.mean_queries;
            // The tuner matched the budget against its own 100-realization
            // estimate, so the held-out deviation carries both sampling
            // errors: tolerance is 5% of budget or twice the combined
            // standard error, whichever is larger.
            let tune_var = table[idx].sd_queries.powi(2) / 100.0;
            let eval_var = out.summary.sd_queries.powi(2) / 100.0;
            let tolerance = (0.05 * budget as f64).max(2.0 * (tune_var + eval_var).sqrt());
            let ok = !saturated && (mean - budget as f64).abs() <= tolerance;
            pass &= ok;
            detail.push_str(&format!(
                "{kind} b={budget}: {mean:.1} (tol {tolerance:.1}); "
            ));
        }
    }
    report(8, pass, detail.trim_end_matches("; "));
}

#[test]
fn acceptance_09_picker_dominates_uniform_coin_at_equal_budget() {
    let family = spread_family(1000);
    let budget = 100u64;
    let (kind, table) = &spread_tables()[0];
    let (idx, _) = choose_beta(table, budget, 100);

    let run = |kind: StrategyKind, beta: f64| {
        let mut spec = EvalSpec::new(kind, beta, budget);
        spec.realizations = RUNS as u64;
        spec.base_seed = BASE_SEED;
        evaluate(&family, &spec).unwrap()
    };
    let picker = run(*kind, table[idx].beta);
    let coin = run(StrategyKind::LabelEfficient, 1.0);

    let n = RUNS as f64;
    let (pi, pc) = (
        picker.summary.identification_probability,
        coin.summary.identification_probability,
    );
    let ident_se = ((pi * (1.0 - pi) + pc * (1.0 - pc)) / n)
        .sqrt()
        .max(1.0 / n);
    let ident_ok = pi >= pc - 2.0 * ident_se;

    let gaps = |rows: &[streampicker_core::EvalRow]| -> Vec<f64> {
        rows.iter().map(|r| r.accuracy_gap).collect()
    };
    let (gi, si) = mean_sd(&gaps(&picker.rows));
    let (gc, sc) = mean_sd(&gaps(&coin.rows));
    let gap_se = ((si * si + sc * sc) / n).sqrt();
    let gap_ok = gi <= gc + 2.0 * gap_se;

    report(
        9,
        ident_ok && gap_ok,
        &format!(
            "identification {pi:.3} vs {pc:.3}, mean gap {gi:.4} vs {gc:.4} (2se slack {:.4}/{:.4}), queries {:.1} vs {:.1}",
            2.0 * ident_se,
            2.0 * gap_se,
            picker.summary.mean_queries,
            coin.summary.mean_queries
        ),
    );
}

#[test]
fn acceptance_10_greedy_variant_regret_plateaus() {
    // Greedy (follow-the-leader) picking with live querying: the excess
    // loss over the best model's 0.1 expected rate must flatline. The
    // second thousand rounds should contribute nothing beyond noise.
    let runs = picker_batch(&two_model_family(2000), GREEDY_SEED, true, &[1000, 2000]);
    let d: Vec<f64> = runs
        .iter()
        .map(|r| (r.losses[1] - r.losses[0]) as f64 - 0.1 * 1000.0)
        .collect();
    let (mean, sd) = mean_sd(&d);
    let limit = 3.0 * sd / (RUNS as f64).sqrt();
    report(
        10,
        mean.abs() <= limit,
        &format!("late-half excess loss {mean:.3} (3se limit {limit:.3})"),
    );
}

#[test]
fn acceptance_11_results_are_bit_identical_across_worker_counts() {
    let family = two_model_family(200);
    let combos = [
        (StrategyKind::ModelPicker, 1.0),
        (StrategyKind::VoteEntropy, 0.5),
    ];
    let budgets = [20u64, 50];

    let run_all = |threads: usize, dir: &std::path::Path| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            let mut summaries = Vec::new();
            for (kind, beta) in combos {
                for budget in budgets {
                    let mut spec = EvalSpec::new(kind, beta, budget);
                    spec.realizations = 10;
                    spec.base_seed = BASE_SEED;
                    let out = evaluate(&family, &spec).unwrap();
                    let path = dir.join(format!("{}_b{budget}.jsonl", kind.name()));
                    write_jsonl(&path, &out.rows).unwrap();
                    summaries.push(SummaryRow {
                        strategy: kind,
                        budget,
                        summary: out.summary,
                    });
                }
            }
            write_summary_csv(&dir.join("summary.csv"), &summaries).unwrap();
        });
    };

    let one = tempfile::tempdir().unwrap();
    let four = tempfile::tempdir().unwrap();
    run_all(1, one.path());
    run_all(4, four.path());

    let mut names: Vec<String> = std::fs::read_dir(one.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names.len(),
        combos.len() * budgets.len() + 1,
        "one file per pair plus the summary"
    );
    let mut compared = 0usize;
    for name in &names {
        let a = std::fs::read(one.path().join(name)).unwrap();
        let b = std::fs::read(four.path().join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between 1 and 4 workers");
        assert!(!a.is_empty(), "{name} is empty");
        compared += 1;
    }
    report(
        11,
        compared == 5,
        &format!("{compared} result files byte-identical between 1-worker and 4-worker runs"),
    );
}
