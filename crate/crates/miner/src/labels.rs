//! Hunk attribution and per-commit semantic labeling over a revision store.
//!
//! Diffs carry raw line positions; labeling and revert analysis additionally
//! want to know which method a hunk falls in and where within it. The DSL
//! parser's line spans provide that.

use std::sync::Arc;

use regress_core::diff::{FileDiff, Hunk};
use regress_core::dsl;
use regress_core::evaluator::RevisionStore;
use regress_core::history::{CommitHistory, CommitId};
use regress_core::model::{reidentify, CodeElement, SimilarityWeights};
use regress_core::semantics::{
    fix_distance, is_revert_fix, label_commit, LabelThresholds, Reidentifier, SemanticLabels,
};
use regress_core::tree::SourceTree;

/// Fills `owner_method` and `relative_span` for each hunk: additions are
/// located in the post-change tree, deletions in the pre-change tree.
pub fn attribute_hunks(diffs: &[FileDiff], prev: &SourceTree, cur: &SourceTree) -> Vec<Hunk> {
    let mut out = Vec::new();
    for fd in diffs {
        for hunk in &fd.hunks {
            let mut h = hunk.clone();
            let located = if !h.add.is_empty() {
                locate(cur, &fd.file, h.add.first().unwrap().line, h.add.last().unwrap().line)
            } else if !h.del.is_empty() {
                locate(prev, &fd.file, h.del.first().unwrap().line, h.del.last().unwrap().line)
            } else {
                None
            };
            if let Some((owner, span)) = located {
                h.owner_method = Some(owner);
                h.relative_span = Some(span);
            }
            out.push(h);
        }
    }
    out
}

/// Finds the method whose body contains the 1-based line range, returning
/// its name and the range's relative position within the body.
fn locate(tree: &SourceTree, file: &str, first: u32, last: u32) -> Option<(String, (f64, f64))> {
    let content = tree.get(file)?;
    let parsed = dsl::parse_file(file, content).ok()?;
    for p in &parsed.elements {
        if !matches!(
            p.element.kind,
            regress_core::model::ElementKind::Method | regress_core::model::ElementKind::Field
        ) {
            continue;
        }
        // spans are 0-based; diff lines are 1-based
        let body_start = p.body_start as u32 + 1;
        let body_end = p.end as u32; // line of the closing brace, exclusive
        if body_start > body_end {
            continue;
        }
        if first >= body_start && last <= body_end {
            let len = (body_end - body_start).max(1) as f64;
            let lo = (first - body_start) as f64 / len;
            let hi = (last - body_start + 1) as f64 / len;
            return Some((p.element.qualified_name.clone(), (lo, hi.min(1.0))));
        }
    }
    None
}

/// Labels every commit of a history. `message_of` supplies commit messages
/// (empty string when unavailable).
pub fn label_history<S: RevisionStore, F>(
    history: &CommitHistory,
    store: &mut S,
    th: &LabelThresholds,
    mut message_of: F,
) -> Vec<(CommitId, SemanticLabels)>
where
    F: FnMut(&CommitId) -> String,
{
    let mut out = Vec::new();
    for c in &history.commits {
        let hunks = attributed_hunks_of(history, store, c.index);
        let labels = label_commit(&hunks, &message_of(c), th);
        out.push((c.clone(), labels));
    }
    out
}

/// The attributed hunks of one commit.
pub fn attributed_hunks_of<S: RevisionStore>(
    history: &CommitHistory,
    store: &mut S,
    index: usize,
) -> Vec<Hunk> {
    let empty = SourceTree::new();
    let cur = store.tree(index).map(|t| t.as_ref().clone()).unwrap_or_default();
    let prev = if index > 0 {
        store
            .tree(index - 1)
            .map(|t| t.as_ref().clone())
            .unwrap_or_default()
    } else {
        empty
    };
    attribute_hunks(history.diff(index), &prev, &cur)
}

/// Re-identification across the fixing-side and inducing-side models.
pub struct ModelReidentifier {
    pub from: Vec<Arc<Vec<CodeElement>>>,
    pub to: Vec<Arc<Vec<CodeElement>>>,
    pub weights: SimilarityWeights,
}

impl Reidentifier for ModelReidentifier {
    fn same_method(&self, fix_method: &str, inducing_method: &str) -> bool {
        if fix_method == inducing_method {
            return true;
        }
        for from in &self.from {
            let Some(elem) = from.iter().find(|e| e.qualified_name == fix_method) else {
                continue;
            };
            for to in &self.to {
                if let Some(found) = reidentify(elem, to.iter(), &self.weights) {
                    if found.qualified_name == inducing_method {
                        return true;
                    }
                }
            }
        }
        false
    }
}

/// Revert flag and fix-distance level for a mined regression.
pub fn revert_and_distance<S: RevisionStore>(
    history: &CommitHistory,
    store: &mut S,
    rfc: &CommitId,
    ric: &CommitId,
    th: &LabelThresholds,
    weights: &SimilarityWeights,
) -> (bool, u8) {
    let h_fix = attributed_hunks_of(history, store, rfc.index);
    let h_inducing = attributed_hunks_of(history, store, ric.index);
    let model = |store: &mut S, index: usize| -> Arc<Vec<CodeElement>> {
        store
            .tree(index)
            .map(|t| Arc::new(dsl::parse_revision(&t, &dsl::DslParser).0))
            .unwrap_or_else(|_| Arc::new(Vec::new()))
    };
    let mut from = vec![model(store, rfc.index)];
    if rfc.index > 0 {
        from.push(model(store, rfc.index - 1));
    }
    let mut to = vec![model(store, ric.index)];
    if ric.index > 0 {
        to.push(model(store, ric.index - 1));
    }
    let reid = ModelReidentifier {
        from,
        to,
        weights: *weights,
    };
    let revert = is_revert_fix(&h_fix, &h_inducing, th, &reid);
    let level = fix_distance(&h_fix, &h_inducing, &reid);
    (revert, level)
}
