//! Stream construction: the round-by-round sequence of prediction vectors
//! and (hidden) true labels a strategy walks through.
//!
//! Five modes. Two draw from a real pool: `stochastic` resamples rows
//! uniformly with replacement, `replay` walks the first T rows in order and
//! stands in for adversarial/drifting data. Three are synthetic: i.i.d.
//! with per-model accuracies, a piecewise-accuracy drift schedule, and the
//! two-model alternating worst case whose loss sequence is
//! (1,0),(0,1),(1,0),… every run. All generators are pure functions of
//! (parameters, seed).

use crate::error::{CoreError, Result};
use crate::math::ClassLabel;
use crate::pool::PredictionPool;
use crate::rng::DetRng;

/// A fully materialized stream: T rounds of k predictions plus the true
/// label per round. Labels live here, not in the strategies; a strategy
/// sees a label only by paying for it.
#[derive(Debug, Clone)]
pub struct Stream {
    num_models: usize,
    num_classes: u32,
    labels: Vec<ClassLabel>,
    predictions: Vec<ClassLabel>,
    pool_indices: Option<Vec<u32>>,
}

/// How to draw a stream from a pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DrawMode {
    /// Uniform with replacement, seeded.
    Stochastic,
    /// Rows 0..T−1 in pool order; the seed is ignored.
    Replay,
}

/// One segment of a drift schedule: rounds `first..=last` (1-based,
/// inclusive) use `accuracies`.
#[derive(Debug, Clone)]
pub struct DriftSegment {
    pub first_round: u64,
    pub last_round: u64,
    pub accuracies: Vec<f64>,
}

/// Output of [`stream_best_model`]: the winner plus the full table sorted
/// by accuracy descending, ties by index ascending.
#[derive(Debug, Clone)]
pub struct BestModelReport {
    pub best: usize,
    pub best_accuracy: f64,
    pub table: Vec<(usize, f64)>,
}

impl Stream {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_models(&self) -> usize {
        self.num_models
    }

    pub fn num_classes(&self) -> u32 {
        self.num_classes
    }

    /// True label of 0-based round `t`.
    pub fn label(&self, t: usize) -> ClassLabel {
        self.labels[t]
    }

    /// Prediction vector of 0-based round `t`.
    pub fn row(&self, t: usize) -> &[ClassLabel] {
        &self.predictions[t * self.num_models..(t + 1) * self.num_models]
    }

    /// Zero-one loss of `model` on 0-based round `t`.
    pub fn loss(&self, t: usize, model: usize) -> u8 {
        u8::from(self.row(t)[model] != self.labels[t])
    }

    /// Pool row each round came from, for pool-backed streams.
    pub fn pool_indices(&self) -> Option<&[u32]> {
        self.pool_indices.as_deref()
    }

    /// Per-model count of correct predictions over rounds 1..=upto.
    pub fn correct_counts(&self, upto: usize) -> Vec<u64> {
        assert!(upto <= self.len(), "prefix exceeds stream length");
        let mut counts = vec![0u64; self.num_models];
        for t in 0..upto {
            let label = self.labels[t];
            for (i, &p) in self.row(t).iter().enumerate() {
                if p == label {
                    counts[i] += 1;
                }
            }
        }
        counts
    }

    /// Per-model accuracy over rounds 1..=upto.
    pub fn accuracies(&self, upto: usize) -> Vec<f64> {
        assert!(upto > 0, "empty prefix has no accuracy");
        self.correct_counts(upto)
            .into_iter()
            .map(|c| c as f64 / upto as f64)
            .collect()
    }

    /// Assembles a stream from explicit labels and a row-major prediction
    /// matrix, for handcrafted cases no generator covers (a perfect model,
    /// adversarial schedules, fixtures).
    pub fn from_parts(
        num_models: usize,
        num_classes: u32,
        labels: Vec<ClassLabel>,
        predictions: Vec<ClassLabel>,
    ) -> Result<Stream> {
        if num_models < 2 {
            return Err(CoreError::invalid("need at least two models"));
        }
        if num_classes < 2 {
            return Err(CoreError::invalid("need at least two classes"));
        }
        if labels.is_empty() {
            return Err(CoreError::invalid("stream length must be at least 1"));
        }
        if predictions.len() != labels.len() * num_models {
            return Err(CoreError::invalid(format!(
                "{} predictions cannot fill {} rounds of {num_models} models",
                predictions.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels
            .iter()
            .chain(&predictions)
            .find(|&&c| c >= num_classes)
        {
            return Err(CoreError::invalid(format!(
                "class id {bad} outside 0..{num_classes}"
            )));
        }
        Ok(Stream {
            num_models,
            num_classes,
            labels,
            predictions,
            pool_indices: None,
        })
    }

    fn with_capacity(num_models: usize, num_classes: u32, len: usize, pooled: bool) -> Self {
        Stream {
            num_models,
            num_classes,
            labels: Vec::with_capacity(len),
            predictions: Vec::with_capacity(len * num_models),
            pool_indices: pooled.then(|| Vec::with_capacity(len)),
        }
    }
}

/// Draws a stream of `len` rounds from a pool. Deterministic given
/// `(pool, mode, len, seed)`.
pub fn draw_stream(pool: &PredictionPool, mode: DrawMode, len: usize, seed: u64) -> Result<Stream> {
    if len == 0 {
        return Err(CoreError::invalid("stream length must be at least 1"));
    }
    if mode == DrawMode::Replay && len > pool.len() {
        return Err(CoreError::invalid(format!(
            "replay of {len} rounds exceeds pool size {}",
            pool.len()
        )));
    }
    let mut stream = Stream::with_capacity(pool.num_models(), pool.num_classes(), len, true);
    let mut rng = DetRng::new(seed);
    for t in 0..len {
        let row = match mode {
            DrawMode::Stochastic => rng.below(pool.len()),
            DrawMode::Replay => t,
        };
        stream.labels.push(pool.label(row));
        stream.predictions.extend_from_slice(pool.row(row));
        stream.pool_indices.as_mut().unwrap().push(row as u32);
    }
    Ok(stream)
}

fn validate_accuracies(accuracies: &[f64], num_classes: u32) -> Result<()> {
    if accuracies.len() < 2 {
        return Err(CoreError::invalid("need at least two models"));
    }
    if num_classes < 2 {
        return Err(CoreError::invalid("need at least two classes"));
    }
    for (i, &a) in accuracies.iter().enumerate() {
        if !(a > 0.0 && a < 1.0) {
            return Err(CoreError::invalid(format!(
                "accuracy of model {i} is {a}; must lie strictly inside (0,1)"
            )));
        }
    }
    Ok(())
}

/// One synthetic round: uniform label; model i predicts it with
/// probability `accuracies[i]`, otherwise a uniformly random wrong class.
/// Model errors are independent across models.
fn synth_round(stream: &mut Stream, accuracies: &[f64], num_classes: u32, rng: &mut DetRng) {
    let label = rng.below(num_classes as usize) as u32;
    stream.labels.push(label);
    for &a in accuracies {
        let prediction = if rng.u01() < a {
            label
        } else {
            let wrong = rng.below(num_classes as usize - 1) as u32;
            wrong + u32::from(wrong >= label)
        };
        stream.predictions.push(prediction);
    }
}

/// I.i.d. synthetic stream with fixed per-model accuracies in (0,1).
pub fn synth_iid(accuracies: &[f64], num_classes: u32, len: usize, seed: u64) -> Result<Stream> {
    validate_accuracies(accuracies, num_classes)?;
    if len == 0 {
        return Err(CoreError::invalid("stream length must be at least 1"));
    }
    let mut stream = Stream::with_capacity(accuracies.len(), num_classes, len, false);
    let mut rng = DetRng::new(seed);
    for _ in 0..len {
        synth_round(&mut stream, accuracies, num_classes, &mut rng);
    }
    Ok(stream)
}

/// Piecewise-i.i.d. drift: each schedule segment supplies its own accuracy
/// vector. Segments must exactly partition rounds 1..=T in order.
pub fn synth_drift(segments: &[DriftSegment], num_classes: u32, seed: u64) -> Result<Stream> {
    if segments.is_empty() {
        return Err(CoreError::invalid("drift schedule is empty"));
    }
    let num_models = segments[0].accuracies.len();
    let mut expected_start = 1u64;
    for (i, seg) in segments.iter().enumerate() {
        validate_accuracies(&seg.accuracies, num_classes)?;
        if seg.accuracies.len() != num_models {
            return Err(CoreError::invalid(format!(
                "segment {i} lists {} models, segment 0 lists {num_models}",
                seg.accuracies.len()
            )));
        }
        if seg.first_round != expected_start {
            return Err(CoreError::invalid(format!(
                "segment {i} starts at round {}, expected {expected_start} \
                 (segments must partition 1..=T without gaps or overlaps)",
                seg.first_round
            )));
        }
        if seg.last_round < seg.first_round {
            return Err(CoreError::invalid(format!("segment {i} is empty")));
        }
        expected_start = seg.last_round + 1;
    }

    let len = segments.last().unwrap().last_round as usize;
    let mut stream = Stream::with_capacity(num_models, num_classes, len, false);
    let mut rng = DetRng::new(seed);
    for seg in segments {
        for _ in seg.first_round..=seg.last_round {
            synth_round(&mut stream, &seg.accuracies, num_classes, &mut rng);
        }
    }
    Ok(stream)
}

/// Two-model binary worst case: the loss vector alternates
/// (1,0),(0,1),(1,0),… so the models stay tied on every even prefix and
/// the vote is split every single round. No randomness involved.
pub fn alternating_stream(len: usize) -> Result<Stream> {
    if len == 0 {
        return Err(CoreError::invalid("stream length must be at least 1"));
    }
    let mut stream = Stream::with_capacity(2, 2, len, false);
    for t in 1..=len {
        stream.labels.push(0);
        if t % 2 == 1 {
            stream.predictions.extend_from_slice(&[1, 0]);
        } else {
            stream.predictions.extend_from_slice(&[0, 1]);
        }
    }
    Ok(stream)
}

/// Highest-accuracy model over rounds 1..=upto, lowest index on ties, with
/// the full accuracy table sorted best-first.
pub fn stream_best_model(stream: &Stream, upto: usize) -> Result<BestModelReport> {
    if upto == 0 {
        return Err(CoreError::invalid("empty prefix has no best model"));
    }
    if upto > stream.len() {
        return Err(CoreError::invalid(format!(
            "prefix {upto} exceeds stream length {}",
            stream.len()
        )));
    }
    let accuracies = stream.accuracies(upto);
    let mut table: Vec<(usize, f64)> = accuracies.iter().copied().enumerate().collect();
    table.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    Ok(BestModelReport {
        best: table[0].0,
        best_accuracy: table[0].1,
        table,
    })
}
