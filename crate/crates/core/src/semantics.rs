//! Semantic labeling of commits and revert/distance analysis of regression
//! pairs, all over hunks.
//!
//! Labels are coarse by design: refactoring means a sizable block moved
//! between hunks, feature enhancement means sizable non-refactoring
//! additions, bug fixing is a commit-message keyword check. A commit can
//! carry several labels; one matching none is `unknown`.


use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::diff::Hunk;
use crate::text::{lcs_len, normalize_code};

/// Thresholds of the labeling rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelThresholds {
    /// Minimum moved-block length (lines) for a refactoring label.
    pub th_len_r: usize,
    /// Code similarity gate for "same piece of code".
    pub th_sim: f64,
    /// Added/deleted size ratio for a single enhancement hunk.
    pub th_r: f64,
    /// Minimum addition length (lines) for an enhancement label.
    pub th_len_f: usize,
    /// Accumulated addition/deletion ratio across hunks.
    pub th_ar: f64,
    /// Guards the accumulated ratio against empty deletions.
    pub epsilon: f64,
}

impl Default for LabelThresholds {
    fn default() -> Self {
        Self {
            th_len_r: 5,
            th_sim: 0.8,
            th_r: 3.0,
            th_len_f: 10,
            th_ar: 15.0,
            epsilon: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticLabels {
    pub refactoring: bool,
    pub feature_enhancement: bool,
    pub bug_fixing: bool,
    pub unknown: bool,
}

impl SemanticLabels {
    pub fn derive(refactoring: bool, feature_enhancement: bool, bug_fixing: bool) -> Self {
        Self {
            refactoring,
            feature_enhancement,
            bug_fixing,
            unknown: !(refactoring || feature_enhancement || bug_fixing),
        }
    }
}

/// Similarity of two code snippets: `min(1, 2·LCS / min(|a|, |b|))` over the
/// characters of whitespace-normalized code; 0 when either side is empty.
/// The raw formula can exceed 1, hence the clamp.
pub fn code_similarity(a: &str, b: &str) -> f64 {
    let na = normalize_code(a);
    let nb = normalize_code(b);
    let ca: Vec<char> = na.chars().collect();
    let cb: Vec<char> = nb.chars().collect();
    let min_len = ca.len().min(cb.len());
    if min_len == 0 {
        return 0.0;
    }
    let sim = 2.0 * lcs_len(&ca, &cb) as f64 / min_len as f64;
    sim.min(1.0)
}

/// Hunk index pairs `(i, j)` where hunk `i`'s addition matches hunk `j`'s
/// deletion (code moved from `j` to `i`), subject to the length gate.
pub fn refactoring_pairs(hunks: &[Hunk], th: &LabelThresholds) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for (i, hi) in hunks.iter().enumerate() {
        for (j, hj) in hunks.iter().enumerate() {
            if i == j {
                continue;
            }
            if hi.add.len() >= th.th_len_r
                && code_similarity(&hi.added_text(), &hj.deleted_text()) >= th.th_sim
            {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

/// A block of at least `th_len_r` lines moved between two hunks.
pub fn label_refactoring(hunks: &[Hunk], th: &LabelThresholds) -> bool {
    !refactoring_pairs(hunks, th).is_empty()
}

/// Sizable additions that are not moved code: either one hunk with a heavily
/// add-dominated change whose addition matches no deletion elsewhere, or an
/// add/delete ratio above `th_ar` accumulated over non-refactoring hunks.
pub fn label_feature_enhancement(
    hunks: &[Hunk],
    th: &LabelThresholds,
    refactoring_pairs: &[(usize, usize)],
) -> bool {
    // condition 1: one dominating addition hunk
    for (i, h) in hunks.iter().enumerate() {
        let dominated = h.del.is_empty() || (h.add.len() as f64 / h.del.len() as f64) > th.th_r;
        if !dominated || h.add.len() <= th.th_len_f {
            continue;
        }
        let moved = hunks.iter().enumerate().any(|(j, other)| {
            j != i && code_similarity(&h.added_text(), &other.deleted_text()) >= th.th_sim
        });
        if !moved {
            return true;
        }
    }
    // condition 2: accumulated additions dwarf deletions, refactoring hunks
    // excluded on both sides
    let in_refactoring = |i: usize| {
        refactoring_pairs
            .iter()
            .any(|&(a, b)| a == i || b == i)
    };
    let mut adds = 0usize;
    let mut dels = 0usize;
    for (i, h) in hunks.iter().enumerate() {
        if in_refactoring(i) {
            continue;
        }
        adds += h.add.len();
        dels += h.del.len();
    }
    adds > th.th_len_f && (adds as f64 / (dels as f64 + th.epsilon)) > th.th_ar
}

/// Keyword check on the commit message: contains "fix" or "bug" (lowercased
/// substring match, so e.g. "debug" also counts).
pub fn label_bug_fixing(message: &str) -> bool {
    let lower = message.to_lowercase();
    lower.contains("fix") || lower.contains("bug")
}

/// All three labels plus the derived `unknown` flag.
pub fn label_commit(hunks: &[Hunk], message: &str, th: &LabelThresholds) -> SemanticLabels {
    let pairs = refactoring_pairs(hunks, th);
    let refactoring = !pairs.is_empty();
    let enhancement = label_feature_enhancement(hunks, th, &pairs);
    SemanticLabels::derive(refactoring, enhancement, label_bug_fixing(message))
}

/// Resolves whether an element of the fixing revision re-identifies to an
/// element of the inducing revision. The pipeline wires this to
/// [`crate::model::reidentify`] over the two models.
pub trait Reidentifier {
    /// True when `fix_method` (fixing side) tracks to `inducing_method`.
    fn same_method(&self, fix_method: &str, inducing_method: &str) -> bool;

    /// True when the two files correspond across the revisions.
    fn same_file(&self, fix_file: &str, inducing_file: &str) -> bool {
        fix_file == inducing_file
    }
}

/// Identity re-identification: equal names, equal paths.
#[derive(Debug, Clone, Copy, Default)]
pub struct ByName;

impl Reidentifier for ByName {
    fn same_method(&self, a: &str, b: &str) -> bool {
        a == b
    }
}

fn spans_overlap(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 <= b.1 && b.0 <= a.1
}

/// Same owner method (via re-identification) and overlapping relative spans.
pub fn same_location(h_f: &Hunk, h_i: &Hunk, reid: &dyn Reidentifier) -> bool {
    let (Some(mf), Some(mi)) = (&h_f.owner_method, &h_i.owner_method) else {
        return false;
    };
    if !reid.same_method(mf, mi) {
        return false;
    }
    match (h_f.relative_span, h_i.relative_span) {
        (Some(a), Some(b)) => spans_overlap(a, b),
        _ => false,
    }
}

/// The fix reverts the inducing change: some fixing hunk re-adds what the
/// inducing commit deleted (or deletes what it added) at the same location.
pub fn is_revert_fix(
    h_fix: &[Hunk],
    h_inducing: &[Hunk],
    th: &LabelThresholds,
    reid: &dyn Reidentifier,
) -> bool {
    for hf in h_fix {
        for hi in h_inducing {
            let similar = code_similarity(&hf.added_text(), &hi.deleted_text()) >= th.th_sim
                || code_similarity(&hf.deleted_text(), &hi.added_text()) >= th.th_sim;
            if similar && same_location(hf, hi, reid) {
                return true;
            }
        }
    }
    false
}

/// Distance from the fix location to the inducing location, minimized over
/// all hunk pairs: 0 same method and overlapping spans, 1 same method, 2
/// same file, 3 elsewhere.
pub fn fix_distance(h_fix: &[Hunk], h_inducing: &[Hunk], reid: &dyn Reidentifier) -> u8 {
    let mut best = 3u8;
    for hf in h_fix {
        for hi in h_inducing {
            let level = pair_distance(hf, hi, reid);
            best = best.min(level);
            if best == 0 {
                return 0;
            }
        }
    }
    best
}

fn pair_distance(hf: &Hunk, hi: &Hunk, reid: &dyn Reidentifier) -> u8 {
    if let (Some(mf), Some(mi)) = (&hf.owner_method, &hi.owner_method) {
        if reid.same_method(mf, mi) {
            let overlap = matches!(
                (hf.relative_span, hi.relative_span),
                (Some(a), Some(b)) if spans_overlap(a, b)
            );
            return if overlap { 0 } else { 1 };
        }
    }
    if reid.same_file(&hf.file, &hi.file) {
        2
    } else {
        3
    }
}
