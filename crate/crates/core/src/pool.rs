//! Prediction pools: the per-instance class predictions of k models on a
//! labeled test set, ingested from CSV.
//!
//! Format: UTF-8, header `label,model_0,…` (any model names work), one data
//! row per instance, comma-separated base-10 non-negative integers, LF line
//! endings, trailing newline optional. The class count defaults to
//! 1 + the largest id seen anywhere; a sidecar file at `<path>.meta.json`
//! with `{ "num_classes": int, "model_names": [str] }` overrides it.

use std::io::BufRead;
use std::path::Path;

use serde::Deserialize;

use crate::error::{CoreError, Result};
use crate::math::ClassLabel;

/// Immutable pool of N labeled instances with one prediction per model.
/// Predictions are stored row-major (N×k). Shareable read-only across
/// workers.
#[derive(Debug, Clone)]
pub struct PredictionPool {
    labels: Vec<ClassLabel>,
    predictions: Vec<ClassLabel>,
    num_models: usize,
    num_classes: u32,
    model_names: Vec<String>,
}

/// Optional sidecar metadata. Missing fields fall back to the CSV itself.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct PoolMeta {
    pub num_classes: Option<u32>,
    pub model_names: Option<Vec<String>>,
}

impl PredictionPool {
    /// Reads `path` and, when present, the sidecar `<path>.meta.json`.
    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let display = path.display().to_string();
        let file = std::fs::File::open(path)?;

        let meta_path = {
            let mut s = path.as_os_str().to_os_string();
            s.push(".meta.json");
            std::path::PathBuf::from(s)
        };
        let meta = if meta_path.exists() {
            let raw = std::fs::read_to_string(&meta_path)?;
            Some(serde_json::from_str(&raw).map_err(|e| {
                CoreError::parse(&meta_path.display().to_string(), e.line(), e.to_string())
            })?)
        } else {
            None
        };

        Self::from_csv_reader(std::io::BufReader::new(file), meta, &display)
    }

    /// Parses pool CSV from any reader. `source_name` labels error messages.
    pub fn from_csv_reader(
        reader: impl BufRead,
        meta: Option<PoolMeta>,
        source_name: &str,
    ) -> Result<Self> {
        let mut lines = reader.lines().enumerate();

        let header = match lines.next() {
            Some((_, line)) => line?,
            None => return Err(CoreError::parse(source_name, 1, "empty file")),
        };
        let header_fields: Vec<&str> = trim_eol(&header).split(',').collect();
        if header_fields.first() != Some(&"label") {
            return Err(CoreError::parse(
                source_name,
                1,
                "header must start with `label`",
            ));
        }
        let num_models = header_fields.len() - 1;
        if num_models < 2 {
            return Err(CoreError::validation(format!(
                "pool declares {num_models} model(s); need at least 2"
            )));
        }

        let mut labels = Vec::new();
        let mut predictions = Vec::new();
        let mut max_id: u32 = 0;
        for (idx, line) in lines {
            let line = line?;
            let line_no = idx + 1;
            let text = trim_eol(&line);
            if text.is_empty() {
                // A single trailing newline produces no extra item from
                // `lines()`; any blank line that does show up is malformed.
                return Err(CoreError::parse(source_name, line_no, "blank line"));
            }
            let fields: Vec<&str> = text.split(',').collect();
            if fields.len() != num_models + 1 {
                return Err(CoreError::parse(
                    source_name,
                    line_no,
                    format!("expected {} fields, found {}", num_models + 1, fields.len()),
                ));
            }
            let mut row = Vec::with_capacity(num_models + 1);
            for field in &fields {
                let value: u32 = field.parse().map_err(|_| {
                    CoreError::parse(
                        source_name,
                        line_no,
                        format!("`{field}` is not a non-negative base-10 integer"),
                    )
                })?;
                max_id = max_id.max(value);
                row.push(value);
            }
            labels.push(row[0]);
            predictions.extend_from_slice(&row[1..]);
        }

        if labels.is_empty() {
            return Err(CoreError::validation("pool has no data rows".to_string()));
        }

        let meta = meta.unwrap_or_default();
        let num_classes = meta.num_classes.unwrap_or(max_id + 1);
        if num_classes < 2 {
            return Err(CoreError::validation(format!(
                "num_classes = {num_classes}; need at least 2"
            )));
        }
        if max_id >= num_classes {
            // Find the first offending entry for the message. Data row r
            // sits on line r + 2 (header is line 1).
            for r in 0..labels.len() {
                let bad = std::iter::once(labels[r])
                    .chain(self_row(&predictions, num_models, r).iter().copied())
                    .find(|&v| v >= num_classes);
                if let Some(id) = bad {
                    return Err(CoreError::validation(format!(
                        "line {}: class id {id} out of range (num_classes = {num_classes})",
                        r + 2
                    )));
                }
            }
        }

        let model_names = match meta.model_names {
            Some(names) => {
                if names.len() != num_models {
                    return Err(CoreError::validation(format!(
                        "sidecar names {} models, CSV has {num_models}",
                        names.len()
                    )));
                }
                names
            }
            None => header_fields[1..].iter().map(|s| s.to_string()).collect(),
        };

        Ok(PredictionPool {
            labels,
            predictions,
            num_models,
            num_classes,
            model_names,
        })
    }

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

    pub fn model_names(&self) -> &[String] {
        &self.model_names
    }

    pub fn label(&self, row: usize) -> ClassLabel {
        self.labels[row]
    }

    pub fn row(&self, row: usize) -> &[ClassLabel] {
        &self.predictions[row * self.num_models..(row + 1) * self.num_models]
    }

    /// Per-model accuracy over the whole pool.
    pub fn accuracies(&self) -> Vec<f64> {
        let mut correct = vec![0u64; self.num_models];
        for r in 0..self.len() {
            let label = self.labels[r];
            for (i, &p) in self.row(r).iter().enumerate() {
                if p == label {
                    correct[i] += 1;
                }
            }
        }
        correct
            .into_iter()
            .map(|c| c as f64 / self.len() as f64)
            .collect()
    }

    /// Fraction of pool rows where at least two models disagree. Under
    /// stochastic resampling this is the exact per-round disagreement
    /// probability.
    pub fn disagreement_fraction(&self) -> f64 {
        let disagreements = (0..self.len())
            .filter(|&r| {
                let row = self.row(r);
                row.iter().any(|&p| p != row[0])
            })
            .count();
        disagreements as f64 / self.len() as f64
    }
}

fn trim_eol(line: &str) -> &str {
    line.strip_suffix('\r').unwrap_or(line)
}

fn self_row(predictions: &[ClassLabel], num_models: usize, row: usize) -> &[ClassLabel] {
    &predictions[row * num_models..(row + 1) * num_models]
}
