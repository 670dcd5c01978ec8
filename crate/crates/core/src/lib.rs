//! Online model selection over prediction streams with budgeted label
//! queries.
//!
//! Given k pretrained models that each emit a class prediction on every
//! instance of a stream, the crate decides round by round whether the true
//! label is worth buying, maintains importance-weighted loss estimates from
//! the labels it does buy, and recommends the model it currently believes is
//! best. The flagship strategy keeps exponential weights over the models and
//! queries with probability driven by the vote variance of the weighted
//! ensemble; five selective-sampling baselines sit behind the same
//! interface for comparison.
//!
//! Module map:
//! - [`math`]: learning rate, vote variance, query probability, exponential
//!   weights, importance-weighted accumulators.
//! - [`pool`] / [`stream`]: prediction pools (CSV + sidecar metadata) and
//!   the stream modes drawn from them (stochastic, replay, synthetic).
//! - [`strategy`]: the samplers themselves behind one trait.
//! - [`harness`]: realization runner, regret/identification metrics,
//!   aggregation, JSONL/CSV persistence.
//! - [`tuning`]: budget-matched grid search over each strategy's scale knob.
//! - [`reference`]: slow recomputation oracle and analytic bound checks
//!   used to validate the fast paths.
//! - [`rng`]: seed-splitting rules; results are independent of worker
//!   count by construction.

pub mod error;
pub mod harness;
pub mod math;
pub mod pool;
pub mod reference;
pub mod rng;
pub mod strategy;
pub mod stream;
pub mod tuning;

pub use error::{CoreError, Result};
pub use harness::{
    EvalOutcome, EvalRow, EvalSpec, InstanceHardness, MetricsSummary, RealizationTrace,
    StreamFamily, SummaryRow, evaluate, instance_hardness, run_realization, summary_csv,
    write_atomic, write_jsonl, write_summary_csv,
};
pub use math::{
    ClassLabel, QueryDecision, argmax_index, argmin_index, class_mass, exp_weights,
    hypothetical_loss, importance_update, learning_rate, max_variance, query_probability,
};
pub use pool::{PoolMeta, PredictionPool};
pub use reference::{
    ForcedOutcome, LemmaCheckReport, MixLossReport, NaiveRound, NaiveTrace, UnbiasednessReport,
    check_exp_bound, check_mix_loss, check_regret_inequality, kl_variance_spot_check,
    naive_model_picker, unbiasedness_estimate,
};
pub use strategy::{
    Efal, Iwal, LabelEfficient, LabelOracle, ModelPicker, RoundOutput, SamplerConfig,
    SelectiveSampler, Sqbc, StrategyKind, VoteEntropy,
};
pub use stream::{
    BestModelReport, DrawMode, DriftSegment, Stream, alternating_stream, draw_stream,
    stream_best_model, synth_drift, synth_iid,
};
pub use tuning::{GridPoint, TuningResult, TuningSpec, choose_beta, tune, tuning_table};
