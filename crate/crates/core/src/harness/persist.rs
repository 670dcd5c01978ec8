//! Atomic result files: per-realization JSON lines and the aggregate CSV.
//!
//! Every writer goes through temp-then-rename in the destination
//! directory, so an interrupted run never leaves a half-written file
//! behind. Numbers are formatted with Rust's shortest-roundtrip notation,
//! which is deterministic, so identical experiments produce byte-identical
//! files.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::{CoreError, Result};
use crate::harness::metrics::MetricsSummary;
use crate::harness::runner::EvalRow;
use crate::strategy::StrategyKind;

/// Writes `bytes` to `path` via a temporary file in the same directory
/// followed by an atomic rename. Parent directories are created.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CoreError::Io(e.error))?;
    Ok(())
}

/// One realization per line, serialized as JSON.
pub fn write_jsonl(path: &Path, rows: &[EvalRow]) -> Result<()> {
    let mut buf = String::new();
    for row in rows {
        let line = serde_json::to_string(row).map_err(std::io::Error::other)?;
        buf.push_str(&line);
        buf.push('\n');
    }
    write_atomic(path, buf.as_bytes())
}

/// Column layout of the aggregate experiment CSV.
pub const SUMMARY_HEADER: &str = "strategy,budget,mean_queries,identification_probability,\
                                  mean_accuracy_gap,p90_accuracy_gap,mean_regret";

/// One aggregate line: a strategy evaluated at one budget.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub strategy: StrategyKind,
    pub budget: u64,
    pub summary: MetricsSummary,
}

/// Renders the aggregate CSV (header plus one line per row).
pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for row in rows {
        let s = &row.summary;
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            row.strategy,
            row.budget,
            s.mean_queries,
            s.identification_probability,
            s.mean_accuracy_gap,
            s.p90_accuracy_gap,
            s.final_mean_regret(),
        )
        .expect("writing to String cannot fail");
    }
    out
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    write_atomic(path, summary_csv(rows).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::runner::{EvalSpec, StreamFamily, evaluate};

    fn sample_outcome() -> (Vec<EvalRow>, MetricsSummary) {
        let family = StreamFamily::SynthIid {
            accuracies: vec![0.9, 0.6],
            num_classes: 2,
            len: 50,
        };
        let mut spec = EvalSpec::new(StrategyKind::ModelPicker, 1.0, 10);
        spec.realizations = 6;
        let outcome = evaluate(&family, &spec).unwrap();
        (outcome.rows, outcome.summary)
    }

    #[test]
    fn jsonl_round_trips_line_by_line() {
        let (rows, _) = sample_outcome();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/out.jsonl");
        write_jsonl(&path, &rows).unwrap();
        let raw = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = raw.lines().collect();
        assert_eq!(lines.len(), rows.len());
        for (line, row) in lines.iter().zip(&rows) {
            let parsed: serde_json::Value = serde_json::from_str(line).unwrap();
            assert_eq!(parsed["seed"], serde_json::json!(row.seed));
            assert_eq!(
                parsed["total_queries"],
                serde_json::json!(row.total_queries)
            );
            assert_eq!(parsed["identified"], serde_json::json!(row.identified));
            assert!(
                parsed.get("pool_accuracy_gap").is_none(),
                "synthetic streams carry no pool-level gap"
            );
        }
    }

    #[test]
    fn summary_csv_pins_its_header_and_row_shape() {
        let (_, summary) = sample_outcome();
        let rows = vec![
            SummaryRow {
                strategy: StrategyKind::ModelPicker,
                budget: 10,
                summary: summary.clone(),
            },
            SummaryRow {
                strategy: StrategyKind::LabelEfficient,
                budget: 25,
                summary,
            },
        ];
        let text = summary_csv(&rows);
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "strategy,budget,mean_queries,identification_probability,\
             mean_accuracy_gap,p90_accuracy_gap,mean_regret"
        );
        let first = lines.next().unwrap();
        assert!(first.starts_with("model-picker,10,"));
        assert_eq!(first.split(',').count(), 7);
        let second = lines.next().unwrap();
        assert!(second.starts_with("label-efficient,25,"));
        assert!(lines.next().is_none());
    }

    #[test]
    fn atomic_writes_replace_and_never_leave_temp_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("file.txt");
        write_atomic(&path, b"first").unwrap();
        write_atomic(&path, b"second").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "second");
        let entries: Vec<_> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(entries.len(), 1, "leftover files: {entries:?}");
    }

    #[test]
    fn identical_runs_serialize_to_identical_bytes() {
        let (rows_a, summary_a) = sample_outcome();
        let (rows_b, summary_b) = sample_outcome();
        let json_a: Vec<String> = rows_a
            .iter()
            .map(|r| serde_json::to_string(r).unwrap())
            .collect();
        let json_b: Vec<String> = rows_b
            .iter()
            .map(|r| serde_json::to_string(r).unwrap())
            .collect();
        assert_eq!(json_a, json_b);
        let row = |s| SummaryRow {
            strategy: StrategyKind::ModelPicker,
            budget: 10,
            summary: s,
        };
        assert_eq!(
            summary_csv(&[row(summary_a)]),
            summary_csv(&[row(summary_b)])
        );
    }
}
