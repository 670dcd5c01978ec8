//! The theory subcommand: numeric self-checks of the guarantees the
//! sampler is built on. Any failing check turns the exit code to 1, so
//! CI can gate on `streampicker theory`.

use std::path::PathBuf;
use std::process::ExitCode;

use serde::Serialize;
use streampicker_core::harness::{EvalSpec, StreamFamily, evaluate, write_atomic};
use streampicker_core::rng::{DetRng, derive_seed, tag};
use streampicker_core::strategy::{ModelPicker, SamplerConfig, SelectiveSampler, StrategyKind};
use streampicker_core::{
    Result, Stream, check_exp_bound, check_mix_loss, check_regret_inequality, exp_weights,
    kl_variance_spot_check, learning_rate, naive_model_picker, synth_iid, unbiasedness_estimate,
};

use crate::config;

#[derive(clap::Args)]
pub struct TheoryArgs {
    /// Heavier grids and more trials (takes tens of seconds).
    #[arg(long)]
    pub full: bool,

    /// Write the check report as JSON to this path.
    #[arg(long, value_name = "FILE")]
    pub json: Option<PathBuf>,

    /// Base seed for the randomized checks (fallback: STREAMPICKER_SEED, then 0).
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Serialize)]
struct CheckOutcome {
    name: String,
    passed: bool,
    detail: String,
}

fn outcome(name: &str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome {
        name: name.to_string(),
        passed,
        detail,
    }
}

/// Scalar inequality sweeps: the regret-term bound and the
/// linear-vs-gaussian bound, on dense grids.
fn lemma_checks(full: bool, seed: u64) -> Vec<CheckOutcome> {
    let regret = check_regret_inequality(if full { 10_000 } else { 1_000 });
    let exp = check_exp_bound(if full { 10_000_000 } else { 1_000_000 });
    let kl = kl_variance_spot_check(if full { 100_000 } else { 2_000 }, seed);
    vec![
        outcome(
            "regret-term-inequality",
            regret.passed,
            format!(
                "max excess {:.2e} over {} points",
                regret.max_violation, regret.grid_points
            ),
        ),
        outcome(
            "exponential-bound",
            exp.passed,
            format!(
                "max excess {:.2e} over {} points",
                exp.max_violation, exp.grid_points
            ),
        ),
        outcome(
            "kl-variance-proximity",
            kl.passed,
            format!(
                "max excess {:.2e} over {} samples",
                kl.max_violation, kl.grid_points
            ),
        ),
    ]
}

/// Mix-loss bound along simulated traces: M_T must stay at or below the
/// best estimated loss plus ln k / eta_T on every seed.
fn mix_loss_check(full: bool, seed: u64) -> Result<CheckOutcome> {
    let seeds = if full { 50 } else { 20 };
    let len = if full { 200 } else { 100 };
    let stream_base = derive_seed(seed, &[tag("mix-loss"), 0]);
    let mut worst_slack = f64::INFINITY;
    let mut passed = true;
    for s in 0..seeds {
        let stream = synth_iid(&[0.8, 0.65, 0.5], 3, len, derive_seed(stream_base, &[s, 0]))?;
        let trace = naive_model_picker(&stream, 1.0, derive_seed(stream_base, &[s, 1]), None)?;
        let report = check_mix_loss(&trace);
        worst_slack = worst_slack.min(report.slack);
        passed &= report.passed;
    }
    Ok(outcome(
        "mix-loss-bound",
        passed,
        format!("{seeds} traces of {len} rounds, smallest slack {worst_slack:.4}"),
    ))
}

/// Fast path against the from-scratch recomputation on random instances:
/// identical decisions, weights within 1e-9 relative.
fn oracle_equivalence(full: bool, seed: u64) -> Result<CheckOutcome> {
    let instances = if full { 100 } else { 20 };
    let mut meta = DetRng::new(derive_seed(seed, &[tag("equivalence")]));
    let mut worst_rel = 0.0f64;
    let mut mismatches = 0u64;
    let mut rounds = 0u64;
    for trial in 0..instances {
        let k = 2 + meta.below(9);
        let num_classes = 2 + meta.below(4) as u32;
        let len = 50 + meta.below(151);
        let accuracies: Vec<f64> = (0..k).map(|_| 0.3 + 0.65 * meta.u01()).collect();
        let stream_seed = derive_seed(seed, &[trial, 0]);
        let shared_seed = derive_seed(seed, &[trial, 1]);
        let beta = [0.5, 1.0, 2.0][meta.below(3)];
        let stream = synth_iid(&accuracies, num_classes, len, stream_seed)?;

        let reference = naive_model_picker(&stream, beta, shared_seed, None)?;
        let cfg = SamplerConfig::new(k, num_classes, beta, shared_seed);
        let mut picker = ModelPicker::new(&cfg)?;
        for (t, naive) in reference.rounds.iter().enumerate() {
            let weights = exp_weights(picker.estimated_losses(), learning_rate(t as u64 + 1, k));
            for (&a, &b) in weights.iter().zip(&naive.weights) {
                worst_rel = worst_rel.max((a - b).abs() / a.max(b));
            }
            let label = stream.label(t);
            let mut oracle = move || Ok(label);
            let (out, rec) = picker.step(stream.row(t), &mut oracle)?;
            if out.chosen_model != naive.chosen_model
                || out.decision.queried != naive.queried
                || rec != naive.recommendation
                || (out.decision.probability - naive.query_probability).abs() > 1e-9
            {
                mismatches += 1;
            }
            rounds += 1;
        }
    }
    Ok(outcome(
        "oracle-equivalence",
        mismatches == 0 && worst_rel <= 1e-9,
        format!(
            "{instances} instances, {rounds} rounds: {mismatches} decision mismatches, \
             worst weight deviation {worst_rel:.2e}"
        ),
    ))
}

/// Estimator bias on a stream that disagrees every round and always
/// contains a correct model: the importance-weighted loss accumulators
/// must be centered within 3 standard errors.
fn unbiasedness_check(full: bool, seed: u64) -> Result<CheckOutcome> {
    let trials = if full { 10_000 } else { 2_000 };
    let len = 60usize;
    let labels: Vec<u32> = (0..len as u32).map(|t| t % 3).collect();
    let mut predictions = Vec::with_capacity(len * 3);
    for &label in &labels {
        predictions.push(label);
        predictions.push((label + 1) % 3);
        predictions.push((label + 2) % 3);
    }
    let stream = Stream::from_parts(3, 3, labels, predictions)?;
    let report = unbiasedness_estimate(&stream, 1.0, trials, seed)?;
    let sigma = report.max_sigma_distance();
    Ok(outcome(
        "estimator-unbiasedness",
        sigma <= 3.0,
        format!("{trials} trials: worst bias {sigma:.2} standard errors (limit 3)"),
    ))
}

/// Worst-case query pressure: on the alternating stream the picker must
/// keep querying at a constant rate instead of going quiet.
fn alternating_check(full: bool, seed: u64) -> Result<CheckOutcome> {
    let len = if full { 800 } else { 400 };
    let realizations = if full { 200 } else { 30 };
    let mut spec = EvalSpec::new(StrategyKind::ModelPicker, 1.0, 0);
    spec.realizations = realizations;
    spec.base_seed = seed;
    let out = evaluate(&StreamFamily::Alternating { len }, &spec)?;
    let rate = out.summary.mean_queries / len as f64;
    Ok(outcome(
        "alternating-query-pressure",
        rate >= 0.15,
        format!("{realizations} runs of {len} rounds: query rate {rate:.3} (floor 0.15)"),
    ))
}

pub fn execute(args: &TheoryArgs) -> Result<ExitCode> {
    let seed = config::resolve_seed(args.seed, None)?;
    let mut checks = lemma_checks(args.full, seed);
    checks.push(mix_loss_check(args.full, seed)?);
    checks.push(oracle_equivalence(args.full, seed)?);
    checks.push(unbiasedness_check(args.full, seed)?);
    checks.push(alternating_check(args.full, seed)?);

    let mut all_passed = true;
    for check in &checks {
        let verdict = if check.passed { "PASS" } else { "FAIL" };
        println!("check {:<28} {verdict} {}", check.name, check.detail);
        all_passed &= check.passed;
    }

    if let Some(path) = &args.json {
        let mut json = serde_json::to_string_pretty(&checks).map_err(std::io::Error::other)?;
        json.push('\n');
        write_atomic(path, json.as_bytes())?;
        println!("wrote {}", path.display());
    }

    if all_passed {
        println!("all {} checks passed", checks.len());
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("self-checks failed");
        Ok(ExitCode::from(1))
    }
}
