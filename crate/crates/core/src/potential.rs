//! Regression-potential scoring of bug-fixing commits.
//!
//! A fix is a regression fix with probability `1 − (1−p)^N` when its feature
//! code absorbed `N` changes before the fix; the practical measurement
//! weights each method's change count by its relevance to the test: a
//! TF-IDF-style test uniqueness times a name-token similarity.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;
use serde::{Deserialize, Serialize};

use crate::history::{CommitId, TestId};
use crate::model::{reidentify, CodeElement, SimilarityWeights};
use crate::text::split_identifier;

/// Boolean coverage of methods by tests.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestMethodMatrix {
    tests: Vec<TestId>,
    /// method qualified name → indices of covering tests
    coverage: BTreeMap<String, BTreeSet<usize>>,
}

impl TestMethodMatrix {
    pub fn new(tests: Vec<TestId>) -> Self {
        Self {
            tests,
            coverage: BTreeMap::new(),
        }
    }

    pub fn n_tests(&self) -> usize {
        self.tests.len()
    }

    pub fn cover(&mut self, method: &str, test: &TestId) {
        if let Some(idx) = self.tests.iter().position(|t| t == test) {
            self.coverage.entry(method.into()).or_default().insert(idx);
        }
    }

    pub fn methods(&self) -> impl Iterator<Item = &str> {
        self.coverage.keys().map(String::as_str)
    }

    /// Number of tests covering the method (1..=N for known methods).
    pub fn freq(&self, method: &str) -> Option<usize> {
        self.coverage.get(method).map(BTreeSet::len)
    }

    pub fn covers(&self, method: &str, test: &TestId) -> Option<bool> {
        let idx = self.tests.iter().position(|t| t == test)?;
        Some(
            self.coverage
                .get(method)
                .map(|s| s.contains(&idx))
                .unwrap_or(false),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MatrixError {
    UnknownMethod(String),
    UnknownTest(String),
}

impl fmt::Display for MatrixError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixError::UnknownMethod(m) => write!(f, "method `{m}` not in matrix"),
            MatrixError::UnknownTest(t) => write!(f, "test `{t}` not in matrix"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for MatrixError {}

/// TF-IDF-style uniqueness of a method for a test: `log_N(N / freq(m))` when
/// the test covers the method, 0 otherwise. With a single test the base-N
/// logarithm is undefined and every method is ubiquitous, so 0.
pub fn test_uniqueness(
    matrix: &TestMethodMatrix,
    method: &str,
    test: &TestId,
) -> Result<f64, MatrixError> {
    let covers = matrix
        .covers(method, test)
        .ok_or_else(|| MatrixError::UnknownTest(test.as_str().into()))?;
    let freq = matrix
        .freq(method)
        .ok_or_else(|| MatrixError::UnknownMethod(method.into()))?;
    if !covers {
        return Ok(0.0);
    }
    let n = matrix.n_tests();
    if freq >= n || n < 2 {
        return Ok(0.0);
    }
    Ok(libm::log(n as f64 / freq as f64) / libm::log(n as f64))
}

/// Lowercased word bag of a test name, camel-case and underscore split,
/// with every `test` token removed.
pub fn name_bag(test_name: &str) -> BTreeSet<String> {
    split_identifier(test_name)
        .into_iter()
        .filter(|t| t != "test")
        .collect()
}

/// Share of the test-name bag matched by tokens of the method's name or
/// body; 0 for an empty bag.
pub fn textual_similarity(test: &TestId, method: &CodeElement) -> f64 {
    let simple = test
        .as_str()
        .rsplit('.')
        .next()
        .unwrap_or(test.as_str());
    let bag = name_bag(simple);
    if bag.is_empty() {
        return 0.0;
    }
    let mut tokens: BTreeSet<String> = split_identifier(&method.simple_name).into_iter().collect();
    for line in method.body.lines() {
        for word in line.split_whitespace() {
            tokens.extend(split_identifier(word));
        }
    }
    let matched = bag.iter().filter(|w| tokens.contains(*w)).count();
    matched as f64 / bag.len() as f64
}

/// `min(1, uniqueness × (1 + textual similarity))`.
pub fn relevance(
    method: &CodeElement,
    test: &TestId,
    matrix: &TestMethodMatrix,
) -> Result<f64, MatrixError> {
    let uniq = test_uniqueness(matrix, &method.qualified_name, test)?;
    let sim = textual_similarity(test, method);
    Ok((uniq * (1.0 + sim)).min(1.0))
}

/// `1 − (1−p)^N`: the probability that at least one of `N` changes on the
/// feature code introduced a regression.
pub fn base_potential(p: f64, n: u32) -> f64 {
    1.0 - libm::pow(1.0 - p, n as f64)
}

/// One method's contribution to the potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodChangeStat {
    pub element: CodeElement,
    pub relevance: f64,
    pub changes: u32,
}

/// Scoring configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialConfig {
    /// Base regression-inducing probability of a single change.
    pub p: f64,
    /// Rank filter threshold.
    pub th_rp: f64,
    /// How many commits back historical changes are counted.
    pub window: usize,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        Self {
            p: 0.05,
            th_rp: 0.3,
            window: 500,
        }
    }
}

/// `1 − ∏ (1 − p·rel(m))^changes(m)` over the feature methods. Reduces to
/// [`base_potential`] for a single fully relevant method.
pub fn regression_potential(stats: &[MethodChangeStat], p: f64) -> f64 {
    let mut survive = 1.0;
    for s in stats {
        survive *= libm::pow(1.0 - p * s.relevance, s.changes as f64);
    }
    1.0 - survive
}

/// Number of commits among the `window` commits before the anchor whose
/// change set touches the (re-identified) counterpart of `m`. Tracking
/// chains backwards through renames via similarity re-identification; the
/// trail ends where the element stops existing.
pub fn count_historical_changes<F>(
    m: &CodeElement,
    anchor: usize,
    mut model_at: F,
    window: usize,
    w: &SimilarityWeights,
) -> u32
where
    F: FnMut(usize) -> Arc<Vec<CodeElement>>,
{
    if anchor == 0 {
        return 0;
    }
    let mut count = 0u32;
    let prev_model = model_at(anchor - 1);
    let Some(found) = reidentify(m, prev_model.iter(), w) else {
        return 0;
    };
    let mut cur = found.clone();
    let lo = anchor.saturating_sub(window).max(1);
    // commit k changed the element iff its k and k−1 counterparts differ
    for k in (lo..anchor).rev() {
        let before = model_at(k - 1);
        let Some(prev) = reidentify(&cur, before.iter(), w) else {
            break;
        };
        if !cur.same_content(prev) {
            count += 1;
        }
        cur = prev.clone();
    }
    count
}

/// Keeps commits scoring at least `th_rp`, best first; equal scores order by
/// commit age (older first). The output never depends on input order.
pub fn rank_and_filter(scored: &[(CommitId, f64)], th_rp: f64) -> Vec<CommitId> {
    let mut kept: Vec<&(CommitId, f64)> = scored.iter().filter(|(_, s)| *s >= th_rp).collect();
    kept.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then_with(|| a.0.index.cmp(&b.0.index))
    });
    kept.into_iter().map(|(c, _)| c.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ElementKind;

    fn matrix_100() -> (TestMethodMatrix, TestId) {
        let tests: Vec<TestId> = (0..100).map(|i| TestId::new(alloc::format!("T.test{i}"))).collect();
        let target = tests[0].clone();
        let mut m = TestMethodMatrix::new(tests.clone());
        // unique method: covered only by test 0
        m.cover("C.unique", &target);
        // ubiquitous method: covered by all 100
        for t in &tests {
            m.cover("C.everywhere", t);
        }
        // freq 10
        for t in tests.iter().take(10) {
            m.cover("C.tenth", t);
        }
        (m, target)
    }

    #[test]
    fn uniqueness_endpoints_and_midpoint() {
        let (m, t) = matrix_100();
        assert_eq!(test_uniqueness(&m, "C.unique", &t).unwrap(), 1.0);
        assert_eq!(test_uniqueness(&m, "C.everywhere", &t).unwrap(), 0.0);
        let mid = test_uniqueness(&m, "C.tenth", &t).unwrap();
        assert!((mid - 0.5).abs() < 1e-12, "log_100(10) = 0.5, got {mid}");
        // not covered by the test → 0
        let other = TestId::new("T.test99");
        assert_eq!(test_uniqueness(&m, "C.unique", &other).unwrap(), 0.0);
        assert!(test_uniqueness(&m, "C.missing", &t).is_err());
    }

    #[test]
    fn name_bag_examples() {
        let bag = name_bag("testCalendarTimeZoneRespected");
        let want: BTreeSet<String> = ["calendar", "time", "zone", "respected"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(bag, want);
        assert!(name_bag("test").is_empty());
        let bag = name_bag("test_parse_HTTPHeader");
        let want: BTreeSet<String> = ["parse", "http", "header"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(bag, want);
    }

    #[test]
    fn textual_similarity_counts_matched_bag_words() {
        let test = TestId::new("FeatureTest.testCalendarTimeZoneRespected");
        let mut m = CodeElement::new(ElementKind::Method, "C.getTimeZoneDisplay");
        assert_eq!(textual_similarity(&test, &m), 0.5);
        m.body = "line calendar respected".into();
        assert_eq!(textual_similarity(&test, &m), 1.0);
        let empty = TestId::new("T.test");
        assert_eq!(textual_similarity(&empty, &m), 0.0);
    }

    #[test]
    fn relevance_clamps() {
        let (matrix, t) = matrix_100();
        let mut m = CodeElement::new(ElementKind::Method, "C.tenth");
        // uniqueness 0.5, similarity 0 ⇒ 0.5
        assert!((relevance(&m, &t, &matrix).unwrap() - 0.5).abs() < 1e-12);
        m.qualified_name = "C.everywhere".into();
        assert_eq!(relevance(&m, &t, &matrix).unwrap(), 0.0);
    }

    #[test]
    fn base_potential_values() {
        assert_eq!(base_potential(0.05, 0), 0.0);
        assert!((base_potential(0.05, 1) - 0.05).abs() < 1e-12);
        assert!((base_potential(0.05, 14) - 0.51233).abs() < 1e-5);
    }

    #[test]
    fn eq5_reduces_to_eq1_and_example_value() {
        let mut e = CodeElement::new(ElementKind::Method, "C.m");
        e.body = String::new();
        let one = alloc::vec![MethodChangeStat {
            element: e.clone(),
            relevance: 1.0,
            changes: 14,
        }];
        assert!((regression_potential(&one, 0.05) - base_potential(0.05, 14)).abs() < 1e-12);

        let two = alloc::vec![
            MethodChangeStat {
                element: e.clone(),
                relevance: 1.0,
                changes: 2,
            },
            MethodChangeStat {
                element: e,
                relevance: 0.5,
                changes: 4,
            },
        ];
        let want = 1.0 - libm::pow(0.95, 2.0) * libm::pow(0.975, 4.0);
        assert!((regression_potential(&two, 0.05) - want).abs() < 1e-12);
        assert!((want - 0.18442).abs() < 1e-4);
        assert_eq!(regression_potential(&[], 0.05), 0.0);
    }

    #[test]
    fn ranking_sorts_and_breaks_ties_by_age() {
        let c = |i: usize| CommitId::new(alloc::format!("c{i}"), i);
        let scored = alloc::vec![
            (c(5), 0.3),
            (c(1), 0.9),
            (c(9), 0.7),
            (c(3), 0.1),
            (c(2), 0.7),
        ];
        let ranked = rank_and_filter(&scored, 0.5);
        let idx: Vec<usize> = ranked.iter().map(|c| c.index).collect();
        assert_eq!(idx, [1, 2, 9]);
        assert!(rank_and_filter(&scored, 0.95).is_empty());
    }
}
