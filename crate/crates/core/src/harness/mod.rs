//! Evaluation harness: run budget-matched realizations of (stream ×
//! strategy), record traces, compute regret / accuracy-gap /
//! identification metrics, and persist results.

pub mod metrics;
pub mod persist;
pub mod runner;
pub mod trace;

pub use metrics::{
    InstanceHardness, MetricsAccumulator, MetricsSummary, RealizationMetrics, accuracy_gap,
    aggregate, identified, instance_hardness, regret_curve,
};
pub use persist::{
    SUMMARY_HEADER, SummaryRow, summary_csv, write_atomic, write_jsonl, write_summary_csv,
};
pub use runner::{EvalOutcome, EvalRow, EvalSpec, StreamFamily, evaluate};
pub use trace::{RealizationTrace, RoundRecord, run_realization};
