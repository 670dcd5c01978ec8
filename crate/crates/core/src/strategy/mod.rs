//! The query strategies behind one selective-sampling interface: observe a
//! prediction vector, emit a prediction and a query decision, consume the
//! label when one was bought, and recommend a model at any point.
//!
//! Six strategies. `model-picker` keeps exponential weights over
//! importance-weighted loss estimates and queries by vote variance. The
//! baselines: `label-efficient` (fixed coin on disagreement rounds),
//! `vote-entropy` (entropy of the vote histogram), `sqbc` (query-by-
//! committee over a posterior), `iwal` (disagreement among models whose
//! weighted error is near the minimum), and `efal` (leader-gap curve).
//!
//! Shared conventions:
//! - All-agree rounds have query probability exactly 0 for every strategy,
//!   advance the round counter, and never touch the label oracle.
//! - One Bernoulli draw is consumed every round even when q = 0, so traces
//!   from one seed stay aligned when only the scale hyperparameter moves.
//! - Tie-breaks in every argmax/argmin resolve to the lowest index.
//! - With no queried labels yet, every strategy recommends model 0.

mod efal;
mod iwal;
mod label_efficient;
mod model_picker;
mod sqbc;
mod vote_entropy;

pub use efal::Efal;
pub use iwal::Iwal;
pub use label_efficient::LabelEfficient;
pub use model_picker::ModelPicker;
pub use sqbc::Sqbc;
pub use vote_entropy::VoteEntropy;

use std::fmt;
use std::str::FromStr;

use crate::error::{CoreError, Result};
use crate::math::{ClassLabel, QueryDecision};
use crate::rng;

/// Callback that buys the current round's true label. Strategies invoke it
/// at most once per round and only when the query coin came up heads.
pub type LabelOracle<'a> = &'a mut dyn FnMut() -> Result<ClassLabel>;

/// Everything a strategy needs at construction. `beta` scales each
/// strategy's query curve (for `efal` it is the threshold constant c0;
/// `label-efficient` ignores it and derives ε from the two hints). Zero is
/// legal so tuning grids can anchor at "never query".
#[derive(Debug, Clone)]
pub struct SamplerConfig {
    pub num_models: usize,
    pub num_classes: u32,
    pub beta: f64,
    pub seed: u64,
    /// Stream length T, required by `label-efficient` (ε = budget/T).
    pub stream_length_hint: Option<u64>,
    /// Label budget b, required by `label-efficient`.
    pub budget_hint: Option<u64>,
    /// `model-picker` only: predict with the recommendation (follow the
    /// leader) instead of sampling the model from the weights.
    pub follow_leader: bool,
    /// `iwal` only: multiplies the survival threshold θ_t.
    pub iwal_threshold_scale: f64,
}

impl SamplerConfig {
    pub fn new(num_models: usize, num_classes: u32, beta: f64, seed: u64) -> Self {
        SamplerConfig {
            num_models,
            num_classes,
            beta,
            seed,
            stream_length_hint: None,
            budget_hint: None,
            follow_leader: false,
            iwal_threshold_scale: 1.0,
        }
    }

    pub fn with_hints(mut self, stream_length: u64, budget: u64) -> Self {
        self.stream_length_hint = Some(stream_length);
        self.budget_hint = Some(budget);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_models < 2 {
            return Err(CoreError::invalid("need at least two models"));
        }
        if self.num_classes < 2 {
            return Err(CoreError::invalid("need at least two classes"));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(CoreError::invalid(format!(
                "scale hyperparameter must be a nonnegative real, got {}",
                self.beta
            )));
        }
        if !(self.iwal_threshold_scale > 0.0) {
            return Err(CoreError::invalid("iwal threshold scale must be positive"));
        }
        Ok(())
    }
}

/// What one observed round produced: the emitted prediction, the model it
/// came from, and the query decision. `predicted_label` always equals
/// `predictions[chosen_model]` for the round's input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundOutput {
    pub predicted_label: ClassLabel,
    pub chosen_model: usize,
    pub decision: QueryDecision,
}

/// One selective sampler. Instances are single-owner mutable state, cheap
/// to build, and intended to be created fresh per realization; parallelism
/// runs independent instances, never shares one.
pub trait SelectiveSampler {
    fn kind(&self) -> StrategyKind;

    /// Rounds observed so far (all-agree rounds included).
    fn rounds_seen(&self) -> u64;

    /// Observes one round. Returns the round output plus the
    /// recommendation in force when the round was predicted. On oracle
    /// failure the error propagates and no state advances, the random
    /// stream included.
    fn step(
        &mut self,
        predictions: &[ClassLabel],
        oracle: LabelOracle<'_>,
    ) -> Result<(RoundOutput, usize)>;

    /// Current best-model estimate; includes everything seen so far.
    fn recommend(&self) -> usize;
}

/// Strategy identifiers, also the canonical CLI names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StrategyKind {
    ModelPicker,
    LabelEfficient,
    VoteEntropy,
    Sqbc,
    Iwal,
    Efal,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 6] = [
        StrategyKind::ModelPicker,
        StrategyKind::LabelEfficient,
        StrategyKind::VoteEntropy,
        StrategyKind::Sqbc,
        StrategyKind::Iwal,
        StrategyKind::Efal,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            StrategyKind::ModelPicker => "model-picker",
            StrategyKind::LabelEfficient => "label-efficient",
            StrategyKind::VoteEntropy => "vote-entropy",
            StrategyKind::Sqbc => "sqbc",
            StrategyKind::Iwal => "iwal",
            StrategyKind::Efal => "efal",
        }
    }

    /// Seed-splitting part for this strategy; combined with the base seed
    /// and realization index by the harness.
    pub fn seed_tag(&self) -> u64 {
        rng::tag(self.name())
    }

    pub fn build(&self, config: &SamplerConfig) -> Result<Box<dyn SelectiveSampler>> {
        config.validate()?;
        Ok(match self {
            StrategyKind::ModelPicker => Box::new(ModelPicker::new(config)?),
            StrategyKind::LabelEfficient => Box::new(LabelEfficient::new(config)?),
            StrategyKind::VoteEntropy => Box::new(VoteEntropy::new(config)?),
            StrategyKind::Sqbc => Box::new(Sqbc::new(config)?),
            StrategyKind::Iwal => Box::new(Iwal::new(config)?),
            StrategyKind::Efal => Box::new(Efal::new(config)?),
        })
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "model-picker" | "model_picker" | "modelpicker" => Ok(StrategyKind::ModelPicker),
            "label-efficient" | "label_efficient" | "efficient" => Ok(StrategyKind::LabelEfficient),
            "vote-entropy" | "vote_entropy" | "entropy" => Ok(StrategyKind::VoteEntropy),
            "sqbc" | "s-qbc" | "qbc" => Ok(StrategyKind::Sqbc),
            "iwal" => Ok(StrategyKind::Iwal),
            "efal" => Ok(StrategyKind::Efal),
            other => Err(CoreError::invalid(format!(
                "unknown strategy `{other}`; expected one of {}",
                StrategyKind::ALL.map(|k| k.name()).join(", ")
            ))),
        }
    }
}

/// True when every model predicts the same class. The structural check
/// keeps the never-query branch exact regardless of float rounding.
pub(crate) fn all_agree(predictions: &[ClassLabel]) -> bool {
    predictions.iter().all(|&p| p == predictions[0])
}

/// Shared bookkeeping for baselines that recommend by raw accuracy on the
/// queried labels: per-model correct counts over a common set of queried
/// rounds, so the count argmax is the accuracy argmax.
#[derive(Debug, Clone)]
pub(crate) struct QueriedAccuracy {
    queried_rounds: u64,
    correct: Vec<u64>,
}

impl QueriedAccuracy {
    pub(crate) fn new(num_models: usize) -> Self {
        QueriedAccuracy {
            queried_rounds: 0,
            correct: vec![0; num_models],
        }
    }

    pub(crate) fn record(&mut self, predictions: &[ClassLabel], label: ClassLabel) {
        self.queried_rounds += 1;
        for (count, &p) in self.correct.iter_mut().zip(predictions) {
            *count += u64::from(p == label);
        }
    }

    /// Lowest-index accuracy maximizer; model 0 when nothing was queried.
    pub(crate) fn recommend(&self) -> usize {
        let mut best = 0;
        for (i, &c) in self.correct.iter().enumerate() {
            if c > self.correct[best] {
                best = i;
            }
        }
        best
    }
}
