//! History searches for the regression-inducing commit.
//!
//! The main search is a binary search over the bracket `(head, tail)` with
//! `head` passing and `tail` failing. Midpoints without feedback (the test
//! cannot compile or resolve there) are skipped by an exponential probe that
//! finds the feedback revision closest to the stuck midpoint on each side;
//! the bracket is then re-anchored on those revisions, or the candidate is
//! abandoned when a no-feedback region reaches a bracket boundary.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use serde::{Deserialize, Serialize};

use crate::history::{CommitHistory, CommitId, EvalError, Evaluate, Feedback, TestId};

/// Caps on the work one search may spend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchBudget {
    /// Fresh (uncached) evaluations the search may trigger.
    pub max_evaluations: u64,
    /// How far from a stuck midpoint the feedback probe may wander.
    pub max_span: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self {
            max_evaluations: 10_000,
            max_span: 1024,
        }
    }
}

/// Probe direction, for trace export.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// Binary-search midpoint probe.
    Mid,
    Past,
    Future,
}

/// One evaluated revision in search order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub commit: CommitId,
    pub feedback: Feedback,
    pub step: usize,
    pub direction: Direction,
}

/// Why a search gave up on the candidate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum AbandonReason {
    /// A no-feedback region abuts the bracket boundary; re-bracketing is
    /// impossible. Carries the stuck midpoint and the bracket at abort time.
    NoFeedbackBoundary {
        stuck_at: usize,
        head: usize,
        tail: usize,
    },
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    FoundRic(CommitId),
    Abandoned(AbandonReason),
    NotRegression,
}

/// Everything a search did, for reports and acceptance checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub visited: Vec<Probe>,
    pub outcome: Outcome,
    /// Underlying runner invocations this search caused (cache hits excluded).
    pub fresh_evaluations: u64,
}

/// Number of distinct runner invocations a finished search cost.
pub fn query_count(trace: &SearchTrace) -> u64 {
    trace.fresh_evaluations
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SearchError {
    /// The head/tail contract does not hold (head must pass, tail must fail).
    Precondition(String),
    Eval(EvalError),
}

impl fmt::Display for SearchError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SearchError::Precondition(msg) => write!(f, "precondition violation: {msg}"),
            SearchError::Eval(e) => write!(f, "{e}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for SearchError {}

impl From<EvalError> for SearchError {
    fn from(e: EvalError) -> Self {
        SearchError::Eval(e)
    }
}

struct Ctx<'a, E: Evaluate + ?Sized> {
    history: &'a CommitHistory,
    test: &'a TestId,
    eval: &'a mut E,
    budget: SearchBudget,
    start_fresh: u64,
    visited: Vec<Probe>,
}

impl<'a, E: Evaluate + ?Sized> Ctx<'a, E> {
    fn new(history: &'a CommitHistory, test: &'a TestId, eval: &'a mut E, budget: SearchBudget) -> Self {
        let start_fresh = eval.fresh_evaluations();
        Self {
            history,
            test,
            eval,
            budget,
            start_fresh,
            visited: Vec::new(),
        }
    }

    fn spent(&self) -> u64 {
        self.eval.fresh_evaluations() - self.start_fresh
    }

    fn exhausted(&self) -> bool {
        self.spent() >= self.budget.max_evaluations
    }

    fn probe(&mut self, index: usize, step: usize, direction: Direction) -> Result<Feedback, EvalError> {
        let commit = self.history.get(index).expect("probe index within history");
        let fb = self.eval.evaluate(commit, self.test)?;
        self.visited.push(Probe {
            commit: commit.clone(),
            feedback: fb.clone(),
            step,
            direction,
        });
        Ok(fb)
    }

    fn finish(self, outcome: Outcome) -> SearchTrace {
        let fresh = self.spent();
        SearchTrace {
            visited: self.visited,
            outcome,
            fresh_evaluations: fresh,
        }
    }
}

/// A fixing commit is confirmed when its test passes the commit itself and
/// fails the (migrated) predecessor. No feedback on either side does not
/// confirm.
pub fn confirm_fix<E: Evaluate + ?Sized>(
    test: &TestId,
    c: &CommitId,
    c_prev: &CommitId,
    eval: &mut E,
) -> Result<bool, EvalError> {
    let at_fix = eval.evaluate(c, test)?;
    if !at_fix.is_pass() {
        return Ok(false);
    }
    Ok(eval.evaluate(c_prev, test)?.is_fail())
}

/// Exponential search for the feedback revision closest to the no-feedback
/// revision `v`, bounded by `b`.
///
/// Starting from `v` the cursor steps toward `b`, doubling the step; every
/// crossing between feedback and no-feedback revisions flips the direction
/// and resets the step to 1, and the closest feedback revision seen is
/// retained. Returns `b` itself when no feedback revision exists between
/// `v` and `b` (within the span bound); the caller reads that as "the
/// region reaches the boundary". On budget exhaustion the best revision so
/// far is returned.
pub fn search_feedback_revision<E: Evaluate + ?Sized>(
    v: &CommitId,
    test: &TestId,
    b: &CommitId,
    history: &CommitHistory,
    eval: &mut E,
    budget: SearchBudget,
) -> Result<(CommitId, Vec<Probe>), SearchError> {
    if v.index == b.index {
        return Err(SearchError::Precondition("v and b must differ".into()));
    }
    let mut ctx = Ctx::new(history, test, eval, budget);
    let index = closest_feedback(&mut ctx, v.index, b.index)?;
    let commit = history.get(index).expect("index within history").clone();
    Ok((commit, ctx.visited))
}

fn closest_feedback<E: Evaluate + ?Sized>(
    ctx: &mut Ctx<'_, E>,
    v: usize,
    b: usize,
) -> Result<usize, SearchError> {
    let lo = v.min(b) as i64;
    let hi = v.max(b) as i64;
    let v_i = v as i64;
    let span = ctx.budget.max_span as i64;
    let toward_b: i64 = if (b as i64) > v_i { 1 } else { -1 };

    let clamp = |x: i64| -> i64 { x.max(lo).max(v_i - span).min(hi).min(v_i + span) };
    let mut best: Option<i64> = None;
    let update_best = |best: &mut Option<i64>, cand: i64| {
        let better = match *best {
            Some(cur) => (cand - v_i).abs() < (cur - v_i).abs(),
            None => true,
        };
        if better {
            *best = Some(cand);
        }
    };

    let mut cursor = v_i;
    let mut cursor_fb = false; // v has no feedback by contract
    let mut dir = toward_b;
    let mut step: i64 = 1;
    loop {
        if ctx.exhausted() {
            return Ok(best.unwrap_or(b as i64) as usize);
        }
        let wanted = cursor + dir * step;
        let next = clamp(wanted);
        let at_edge = next != wanted || next == lo || next == hi;
        if next == cursor {
            // pinned against the boundary; nothing left to explore this way
            return Ok(best.unwrap_or(b as i64) as usize);
        }
        let direction = if dir < 0 { Direction::Past } else { Direction::Future };
        let fb = ctx.probe(next as usize, step as usize, direction)?.has_feedback();
        match (fb, cursor_fb) {
            // crossed into feedback territory: record, flip, fine-tune
            (true, false) => {
                update_best(&mut best, next);
                dir = -dir;
                step = 1;
                cursor = next;
                cursor_fb = true;
            }
            (true, true) => {
                update_best(&mut best, next);
                if at_edge {
                    return Ok(best.unwrap_or(b as i64) as usize);
                }
                step *= 2;
                cursor = next;
            }
            (false, false) => {
                if at_edge {
                    return Ok(best.unwrap_or(b as i64) as usize);
                }
                step *= 2;
                cursor = next;
            }
            // stepped out of feedback territory
            (false, true) => {
                if step == 1 {
                    // the adjacent revision already lacks feedback: the
                    // retained best is the closest
                    return Ok(best.unwrap_or(b as i64) as usize);
                }
                // overshot: retreat to the last feedback revision and
                // fine-tune from there
                step = 1;
            }
        }
    }
}

/// Binary search for the oldest failing commit within `(head, tail]`, given
/// that the test passes `head` and fails `tail`. No-feedback midpoints are
/// skipped via [`search_feedback_revision`] toward both boundaries; when a
/// no-feedback region reaches a boundary the candidate is abandoned.
///
/// On success the returned commit `ric` satisfies `fail(ric)` and
/// `pass(ric - 1)`.
pub fn search_regression_inducing<E: Evaluate + ?Sized>(
    head: &CommitId,
    tail: &CommitId,
    test: &TestId,
    history: &CommitHistory,
    eval: &mut E,
    budget: SearchBudget,
) -> Result<(Option<CommitId>, SearchTrace), SearchError> {
    let mut ctx = Ctx::new(history, test, eval, budget);
    if head.index >= tail.index {
        return Err(SearchError::Precondition("head must precede tail".into()));
    }
    // contract checks double as the first probes
    let head_fb = ctx.probe(head.index, 0, Direction::Mid)?;
    if !head_fb.is_pass() {
        return Err(SearchError::Precondition(alloc::format!(
            "test must pass head {head}",
        )));
    }
    let tail_fb = ctx.probe(tail.index, 0, Direction::Mid)?;
    if !tail_fb.is_fail() {
        return Err(SearchError::Precondition(alloc::format!(
            "test must fail tail {tail}",
        )));
    }

    let mut h = head.index;
    let mut t = tail.index;
    while t - h > 1 {
        if ctx.exhausted() {
            let trace = ctx.finish(Outcome::Abandoned(AbandonReason::BudgetExhausted));
            return Ok((None, trace));
        }
        let mid = h + (t - h) / 2;
        match ctx.probe(mid, 0, Direction::Mid)? {
            Feedback::Pass => h = mid,
            Feedback::Fail(_) => t = mid,
            Feedback::NoFeedback(_) => {
                let b1 = closest_feedback(&mut ctx, mid, h)?;
                let b2 = closest_feedback(&mut ctx, mid, t)?;
                if b1 == h || b2 == t {
                    let trace = ctx.finish(Outcome::Abandoned(AbandonReason::NoFeedbackBoundary {
                        stuck_at: mid,
                        head: h,
                        tail: t,
                    }));
                    return Ok((None, trace));
                }
                let b1_pass = ctx.probe(b1, 0, Direction::Mid)?.is_pass();
                let b2_pass = ctx.probe(b2, 0, Direction::Mid)?.is_pass();
                if b2_pass {
                    h = b2;
                } else if b1_pass {
                    h = b1;
                    t = b2;
                } else {
                    t = b1;
                }
            }
        }
    }
    let ric = history.get(t).expect("tail within history").clone();
    let trace = ctx.finish(Outcome::FoundRic(ric.clone()));
    Ok((Some(ric), trace))
}

/// Plain bisect that conservatively treats no-feedback revisions as
/// failures. Matches the full search on clean histories; near no-feedback
/// regions it may blame a revision that gave no feedback at all.
pub fn bisect_baseline<E: Evaluate + ?Sized>(
    head: &CommitId,
    tail: &CommitId,
    test: &TestId,
    history: &CommitHistory,
    eval: &mut E,
) -> Result<(Option<CommitId>, SearchTrace), SearchError> {
    let mut ctx = Ctx::new(history, test, eval, SearchBudget::default());
    if head.index >= tail.index {
        return Err(SearchError::Precondition("head must precede tail".into()));
    }
    let mut h = head.index;
    let mut t = tail.index;
    while t - h > 1 {
        let mid = h + (t - h) / 2;
        if ctx.probe(mid, 0, Direction::Mid)?.is_pass() {
            h = mid;
        } else {
            t = mid;
        }
    }
    let ric = history.get(t).expect("tail within history").clone();
    let trace = ctx.finish(Outcome::FoundRic(ric.clone()));
    Ok((Some(ric), trace))
}

/// Line-ancestry baseline: the most recent commit before `rfc` that last
/// wrote any line deleted by the fix. Pure diff arithmetic; whether the test
/// can actually be migrated to the blamed commit is checked by the caller.
pub fn blame_baseline(rfc: &CommitId, history: &CommitHistory) -> Option<CommitId> {
    let mut best: Option<usize> = None;
    for fd in history.diff(rfc.index) {
        for hunk in &fd.hunks {
            for del in &hunk.del {
                if let Some(writer) = blame_line(history, rfc.index, &fd.file, del.line) {
                    best = Some(best.map_or(writer, |b| b.max(writer)));
                }
            }
        }
    }
    best.and_then(|i| history.get(i).cloned())
}

/// Walks a (file, line) backwards from the revision before `fix_index`,
/// returning the commit that added the line.
pub fn blame_line(history: &CommitHistory, fix_index: usize, file: &str, line: u32) -> Option<usize> {
    let mut line = line;
    // the deleted line's position refers to the revision fix_index - 1
    let mut k = fix_index.checked_sub(1)?;
    loop {
        let diff = history.diff(k);
        let fd = diff.iter().find(|d| d.file == file);
        if let Some(fd) = fd {
            for hunk in &fd.hunks {
                if hunk.add.iter().any(|a| a.line == line) {
                    return Some(k);
                }
            }
            // map the position into the pre-commit file
            let adds_before = fd
                .hunks
                .iter()
                .flat_map(|h| &h.add)
                .filter(|a| a.line < line)
                .count() as i64;
            let mut old = line as i64 - adds_before;
            loop {
                let dels_before = fd
                    .hunks
                    .iter()
                    .flat_map(|h| &h.del)
                    .filter(|d| (d.line as i64) <= old)
                    .count() as i64;
                let next = line as i64 - adds_before + dels_before;
                if next == old {
                    break;
                }
                old = next;
            }
            if old < 1 {
                return None;
            }
            line = old as u32;
        }
        if k == 0 {
            return None;
        }
        k -= 1;
    }
}
