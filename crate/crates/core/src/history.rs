//! Linearized commit histories, test feedback, and the evaluation contract.
//!
//! Histories are totally ordered by index (0 = oldest) so the searches can do
//! plain index arithmetic. Evaluating a test on a revision yields tri-state
//! [`Feedback`]: pass, fail with a signature, or no feedback when the
//! revision cannot resolve the test at all.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use serde::{Deserialize, Serialize};

use crate::diff::FileDiff;
use crate::model::CodeElement;
use crate::text::lcs_ratio;

/// A commit plus its position in one linearized history (0 = oldest).
///
/// `c1 ≻ c2 ⇔ index(c1) > index(c2)`; the opaque id is never ordered.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CommitId {
    pub id: String,
    pub index: usize,
}

impl CommitId {
    pub fn new(id: impl Into<String>, index: usize) -> Self {
        Self { id: id.into(), index }
    }
}

impl fmt::Display for CommitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.id, self.index)
    }
}

/// Identifier of a test method (its qualified name).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TestId(pub String);

impl TestId {
    pub fn new(name: impl Into<String>) -> Self {
        Self(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// First-parent linearized history of one branch.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CommitHistory {
    pub branch: String,
    pub commits: Vec<CommitId>,
    /// Per-commit diffs against the (first-parent) predecessor, keyed by index.
    pub diffs: BTreeMap<usize, Vec<FileDiff>>,
}

impl CommitHistory {
    pub fn len(&self) -> usize {
        self.commits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.commits.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&CommitId> {
        self.commits.get(index)
    }

    /// The commit before `c`, i.e. `c - 1`; `None` for the oldest commit.
    pub fn predecessor(&self, c: &CommitId) -> Option<&CommitId> {
        c.index.checked_sub(1).and_then(|i| self.commits.get(i))
    }

    pub fn diff(&self, index: usize) -> &[FileDiff] {
        self.diffs.get(&index).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Where and how a failing test failed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FailureSignature {
    pub message: String,
    /// File of the failing assertion, within the test.
    pub file: String,
    /// Line of the failing assertion, within the test.
    pub line: u32,
}

/// Why a revision yields no feedback for a test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NoFeedbackReason {
    CompileError,
    TestUnresolvable,
    Timeout,
}

/// Tri-state outcome of evaluating a test on a revision.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Feedback {
    Pass,
    Fail(FailureSignature),
    NoFeedback(NoFeedbackReason),
}

impl Feedback {
    /// Pass or Fail, i.e. usable guidance for a search.
    pub fn has_feedback(&self) -> bool {
        !matches!(self, Feedback::NoFeedback(_))
    }

    pub fn is_pass(&self) -> bool {
        matches!(self, Feedback::Pass)
    }

    pub fn is_fail(&self) -> bool {
        matches!(self, Feedback::Fail(_))
    }

    pub fn failure(&self) -> Option<&FailureSignature> {
        match self {
            Feedback::Fail(sig) => Some(sig),
            _ => None,
        }
    }
}

/// Two failures share a root cause iff message and location are identical.
pub fn same_root_cause(f1: &FailureSignature, f2: &FailureSignature) -> bool {
    f1.message == f2.message && f1.file == f2.file && f1.line == f2.line
}

/// Compatibility of the failing behavior across the fixing and inducing
/// sides of a candidate regression: same root cause, same target method
/// name, and target bodies similar at least `th_body`.
pub fn compatible_fail(
    rfc_fail: &FailureSignature,
    ric_fail: &FailureSignature,
    rfc_target: &CodeElement,
    ric_target: &CodeElement,
    th_body: f64,
) -> bool {
    if !same_root_cause(rfc_fail, ric_fail) {
        return false;
    }
    if rfc_target.simple_name != ric_target.simple_name {
        return false;
    }
    let a = crate::text::body_tokens(&rfc_target.body);
    let b = crate::text::body_tokens(&ric_target.body);
    lcs_ratio(&a, &b) >= th_body
}

/// Evaluation failed outright; the candidate's search must be aborted.
/// Distinct from `NoFeedback`, which is a regular search observation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalError {
    RunnerCrash(String),
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::RunnerCrash(msg) => write!(f, "runner crashed: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for EvalError {}

/// Evaluates a test against revisions of one history.
///
/// Implementations are expected to memoize: repeated calls for the same
/// `(revision, test, migration fingerprint)` must return the first result
/// without re-running anything. `fresh_evaluations` exposes the number of
/// underlying runner invocations so searches can report their probe cost.
pub trait Evaluate {
    fn evaluate(&mut self, rev: &CommitId, test: &TestId) -> Result<Feedback, EvalError>;

    /// Count of runner invocations so far (cache hits excluded).
    fn fresh_evaluations(&self) -> u64;
}

/// Feedback memo keyed by `(commit id, test id, migration fingerprint)`.
///
/// The fingerprint keeps migrated and unmigrated evaluations of the same
/// revision from ever colliding; `0` means "no migration applied".
#[derive(Debug, Default, Clone)]
pub struct FeedbackCache {
    map: BTreeMap<(String, String, u64), Feedback>,
    hits: u64,
}

impl FeedbackCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&mut self, commit: &str, test: &TestId, fingerprint: u64) -> Option<Feedback> {
        let got = self
            .map
            .get(&(String::from(commit), test.0.clone(), fingerprint))
            .cloned();
        if got.is_some() {
            self.hits += 1;
        }
        got
    }

    pub fn insert(&mut self, commit: &str, test: &TestId, fingerprint: u64, fb: Feedback) {
        self.map
            .insert((String::from(commit), test.0.clone(), fingerprint), fb);
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Memoizing adapter around a raw evaluation function (no migration, so the
/// cache fingerprint is fixed to 0).
pub struct MemoEvaluator<F> {
    run: F,
    cache: FeedbackCache,
    fresh: u64,
}

impl<F> MemoEvaluator<F>
where
    F: FnMut(&CommitId, &TestId) -> Result<Feedback, EvalError>,
{
    pub fn new(run: F) -> Self {
        Self {
            run,
            cache: FeedbackCache::new(),
            fresh: 0,
        }
    }

    pub fn cache_hits(&self) -> u64 {
        self.cache.hits()
    }

    pub fn total_calls(&self) -> u64 {
        self.cache.hits() + self.fresh
    }
}

impl<F> Evaluate for MemoEvaluator<F>
where
    F: FnMut(&CommitId, &TestId) -> Result<Feedback, EvalError>,
{
    fn evaluate(&mut self, rev: &CommitId, test: &TestId) -> Result<Feedback, EvalError> {
        if let Some(fb) = self.cache.get(&rev.id, test, 0) {
            return Ok(fb);
        }
        let fb = (self.run)(rev, test)?;
        self.fresh += 1;
        self.cache.insert(&rev.id, test, 0, fb.clone());
        Ok(fb)
    }

    fn fresh_evaluations(&self) -> u64 {
        self.fresh
    }
}
