//! Dataset export: JSON-lines records, per-search trace files, CSV reports,
//! and a summary with the diversity metrics.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use regress_core::semantics::SemanticLabels;
use serde::{Deserialize, Serialize};

use crate::metrics::diversity_entropy;
use crate::pipeline::{CandidateOutcome, MineOutcome, RegressionRecord, ScoredCandidate};

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct Summary {
    pub repos: usize,
    pub candidates: usize,
    pub records: usize,
    pub outcome_counts: BTreeMap<String, u64>,
    /// Ten coverage-similarity buckets: [0.0,0.1), …, [0.9,1.0].
    pub coverage_histogram: Vec<u64>,
    pub label_counts: BTreeMap<String, u64>,
    pub label_entropy: Option<f64>,
    pub fresh_evaluations: u64,
}

fn outcome_key(outcome: &CandidateOutcome) -> &'static str {
    match outcome {
        CandidateOutcome::Mined => "mined",
        CandidateOutcome::NotAFix => "not_a_fix",
        CandidateOutcome::LowPotential { .. } => "low_potential",
        CandidateOutcome::NotRegression => "not_regression",
        CandidateOutcome::MigrationFailed => "migration_failed",
        CandidateOutcome::NoFeedbackBoundary => "no_feedback_boundary",
        CandidateOutcome::BudgetExhausted => "budget_exhausted",
        CandidateOutcome::IncompatibleFailure => "incompatible_failure",
        CandidateOutcome::BlameUnconfirmed => "blame_unconfirmed",
        CandidateOutcome::Error { .. } => "error",
    }
}

pub fn coverage_histogram(records: &[&RegressionRecord]) -> Vec<u64> {
    let mut buckets = vec![0u64; 10];
    for r in records {
        if let Some(c) = r.coverage_similarity {
            let idx = ((c * 10.0).floor() as usize).min(9);
            buckets[idx] += 1;
        }
    }
    buckets
}

pub fn build_summary(
    outcomes: &[MineOutcome],
    labels: &BTreeMap<String, SemanticLabels>,
) -> Summary {
    let records: Vec<&RegressionRecord> =
        outcomes.iter().flat_map(|o| o.records.iter()).collect();
    let mut outcome_counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut candidates = 0usize;
    for o in outcomes {
        for r in &o.reports {
            candidates += 1;
            *outcome_counts.entry(outcome_key(&r.outcome).into()).or_default() += 1;
        }
    }
    let mut label_counts: BTreeMap<String, u64> = BTreeMap::new();
    for l in labels.values() {
        if l.refactoring {
            *label_counts.entry("refactoring".into()).or_default() += 1;
        }
        if l.feature_enhancement {
            *label_counts.entry("feature_enhancement".into()).or_default() += 1;
        }
        if l.bug_fixing {
            *label_counts.entry("bug_fixing".into()).or_default() += 1;
        }
        if l.unknown {
            *label_counts.entry("unknown".into()).or_default() += 1;
        }
    }
    Summary {
        repos: outcomes.len(),
        candidates,
        records: records.len(),
        outcome_counts,
        coverage_histogram: coverage_histogram(&records),
        label_entropy: diversity_entropy(&label_counts).ok(),
        label_counts,
        fresh_evaluations: outcomes.iter().map(|o| o.fresh_evaluations).sum(),
    }
}

/// Writes the dataset to `dir`: `regressions.jsonl`, per-record trace files
/// under `traces/`, candidate reports, and `summary.json`. Returns the
/// manifest (dataset) path.
pub fn export_dataset(
    outcomes: &[MineOutcome],
    labels: &BTreeMap<String, SemanticLabels>,
    dir: &Path,
) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {dir:?}"))?;
    let dataset = dir.join("regressions.jsonl");
    let mut f = std::fs::File::create(&dataset)?;
    for o in outcomes {
        for r in &o.records {
            writeln!(f, "{}", serde_json::to_string(r)?)?;
        }
    }

    let traces_dir = dir.join("traces");
    std::fs::create_dir_all(&traces_dir)?;
    for o in outcomes {
        for (name, trace) in &o.traces {
            let mut tf = std::fs::File::create(traces_dir.join(format!("{name}.jsonl")))?;
            for p in &trace.visited {
                writeln!(tf, "{}", serde_json::to_string(p)?)?;
            }
            writeln!(
                tf,
                "{}",
                serde_json::json!({
                    "outcome": trace.outcome,
                    "fresh_evaluations": trace.fresh_evaluations,
                })
            )?;
        }
    }

    let mut rf = std::fs::File::create(dir.join("reports.jsonl"))?;
    for o in outcomes {
        for r in &o.reports {
            writeln!(rf, "{}", serde_json::to_string(r)?)?;
        }
    }

    let summary = build_summary(outcomes, labels);
    std::fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    Ok(dataset)
}

/// Reads a dataset back (inverse of [`export_dataset`]'s manifest).
pub fn read_dataset(path: &Path) -> Result<Vec<RegressionRecord>> {
    let raw = std::fs::read_to_string(path).with_context(|| format!("reading {path:?}"))?;
    let mut out = Vec::new();
    for line in raw.lines() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(line)?);
    }
    Ok(out)
}

/// `commit_id,score,n_methods,total_changes` per candidate.
pub fn scores_csv(scored: &[ScoredCandidate]) -> String {
    let mut out = String::from("commit_id,score,n_methods,total_changes\n");
    for s in scored {
        out.push_str(&format!(
            "{},{:.6},{},{}\n",
            s.commit.id, s.score, s.n_methods, s.total_changes
        ));
    }
    out
}

/// `commit_id,refactoring,feature_enhancement,bug_fixing,unknown` per commit.
pub fn labels_csv(labels: &[(regress_core::CommitId, SemanticLabels)]) -> String {
    let mut out = String::from("commit_id,refactoring,feature_enhancement,bug_fixing,unknown\n");
    for (c, l) in labels {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            c.id, l.refactoring, l.feature_enhancement, l.bug_fixing, l.unknown
        ));
    }
    out
}

/// `regression_id,revert,level` per mined regression.
pub fn distance_csv(rows: &[(String, bool, u8)]) -> String {
    let mut out = String::from("regression_id,revert,level\n");
    for (id, revert, level) in rows {
        out.push_str(&format!("{id},{revert},{level}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use regress_core::history::TestId;
    use regress_core::CommitId;

    fn record(cov: Option<f64>) -> RegressionRecord {
        RegressionRecord {
            repo: "r".into(),
            rfc: CommitId::new("aaa", 9),
            ric: CommitId::new("bbb", 4),
            wc: CommitId::new("ccc", 3),
            test: TestId::new("T.testX"),
            coverage_similarity: cov,
            trace_ref: "trace.jsonl".into(),
            migrated_fingerprint: 42,
        }
    }

    #[test]
    fn dataset_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let outcome = MineOutcome {
            repo: "r".into(),
            records: vec![record(Some(0.66))],
            reports: vec![],
            traces: vec![],
            fresh_evaluations: 7,
        };
        let path = export_dataset(&[outcome], &BTreeMap::new(), dir.path()).unwrap();
        let records = read_dataset(&path).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0], record(Some(0.66)));
        assert!(dir.path().join("summary.json").exists());
    }

    #[test]
    fn empty_dataset_is_a_valid_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = export_dataset(&[], &BTreeMap::new(), dir.path()).unwrap();
        assert!(path.exists());
        assert_eq!(read_dataset(&path).unwrap().len(), 0);
    }

    #[test]
    fn histogram_counts_every_scored_record() {
        let records: Vec<RegressionRecord> = (0..100)
            .map(|i| record(Some(i as f64 / 100.0)))
            .collect();
        let refs: Vec<&RegressionRecord> = records.iter().collect();
        let hist = coverage_histogram(&refs);
        assert_eq!(hist.iter().sum::<u64>(), 100);
        assert_eq!(hist, vec![10; 10]);
    }
}
