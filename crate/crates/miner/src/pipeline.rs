//! The mining pipeline: candidate discovery, fix confirmation, potential
//! ranking, and the migration-aware search for each surviving candidate.
//!
//! Order matters and is observable: potential is estimated only for
//! confirmed fixes, searches run only for ranked survivors, and every
//! candidate that drops out is reported with its reason.

use std::collections::BTreeSet;
use std::sync::Arc;

use regress_core::evaluator::{MigratingEvaluator, RevisionStore, TreeRunner};
use regress_core::history::{CommitHistory, CommitId, Evaluate, Feedback, TestId};
use regress_core::migrate::dependency_closure;
use regress_core::model::{is_test_element, reidentify, CodeElement, ElementKind};
use regress_core::potential::{
    count_historical_changes, regression_potential, relevance, MethodChangeStat, TestMethodMatrix,
};
use regress_core::search::{
    bisect_baseline, blame_baseline, search_feedback_revision, search_regression_inducing,
    AbandonReason, Outcome, SearchError, SearchTrace,
};
use serde::{Deserialize, Serialize};

use crate::cache::{SharedCachedEvaluator, SharedFeedbackCache};
use crate::config::MinerConfig;
use crate::metrics::feature_coverage_similarity;

/// One mined regression triple with its working commit and evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionRecord {
    pub repo: String,
    pub rfc: CommitId,
    pub ric: CommitId,
    pub wc: CommitId,
    pub test: TestId,
    pub coverage_similarity: Option<f64>,
    pub trace_ref: String,
    pub migrated_fingerprint: u64,
}

/// Why a candidate dropped out (or that it was mined).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CandidateOutcome {
    Mined,
    /// The added test does not pass the commit or fail its predecessor.
    NotAFix,
    /// Ranked below the potential threshold.
    LowPotential { score: f64 },
    /// The test (compatibly) fails all the way back to the initial revision.
    NotRegression,
    /// The test could not be migrated far enough to bracket a search.
    MigrationFailed,
    /// A no-feedback region reached the search bracket boundary.
    NoFeedbackBoundary,
    BudgetExhausted,
    /// The failures at rfc-1 and ric do not share a compatible root cause.
    IncompatibleFailure,
    /// Line-ancestry strategy produced a commit that fails replay.
    BlameUnconfirmed,
    /// Infrastructure error; other candidates are unaffected.
    Error { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateReport {
    pub commit: CommitId,
    pub test: TestId,
    pub score: Option<f64>,
    pub outcome: CandidateOutcome,
}

/// Scored candidate row, exported by the `rank` subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub commit: CommitId,
    pub test: TestId,
    pub score: f64,
    pub n_methods: usize,
    pub total_changes: u64,
}

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct MineOutcome {
    pub repo: String,
    pub records: Vec<RegressionRecord>,
    pub reports: Vec<CandidateReport>,
    pub traces: Vec<(String, SearchTrace)>,
    pub fresh_evaluations: u64,
}

/// Commits whose diff adds at least one new test method, one candidate per
/// added test.
pub fn find_test_adding_commits<F>(
    history: &CommitHistory,
    mut model_at: F,
    test_paths: &[String],
) -> Vec<(CommitId, TestId)>
where
    F: FnMut(usize) -> Arc<Vec<CodeElement>>,
{
    let mut out = Vec::new();
    for k in 1..history.len() {
        let prev: BTreeSet<String> = model_at(k - 1)
            .iter()
            .map(|e| e.qualified_name.clone())
            .collect();
        for e in model_at(k).iter() {
            if e.kind == ElementKind::Method
                && is_test_element(e, test_paths)
                && !prev.contains(&e.qualified_name)
            {
                out.push((
                    history.commits[k].clone(),
                    TestId::new(e.qualified_name.clone()),
                ));
            }
        }
    }
    out
}

/// Builds the test-method matrix of a revision from static dependency
/// closures: test t covers method m iff m is reachable from t's references.
pub fn build_matrix(model: &[CodeElement], test_paths: &[String]) -> TestMethodMatrix {
    let tests: Vec<TestId> = model
        .iter()
        .filter(|e| e.kind == ElementKind::Method && is_test_element(e, test_paths))
        .map(|e| TestId::new(e.qualified_name.clone()))
        .collect();
    let mut matrix = TestMethodMatrix::new(tests.clone());
    for t in &tests {
        let (closure, _unresolved) = dependency_closure(t.as_str(), model, None);
        for name in &closure {
            let Some(e) = model.iter().find(|e| &e.qualified_name == name) else {
                continue;
            };
            if e.kind == ElementKind::Method && !is_test_element(e, test_paths) {
                matrix.cover(name, t);
            }
        }
    }
    matrix
}

/// Relevance-weighted change statistics for the feature methods of one
/// candidate test.
pub fn method_stats<F>(
    test: &TestId,
    fix_index: usize,
    model: &[CodeElement],
    matrix: &TestMethodMatrix,
    mut model_at: F,
    config: &MinerConfig,
) -> Vec<MethodChangeStat>
where
    F: FnMut(usize) -> Arc<Vec<CodeElement>>,
{
    let (closure, _unresolved) = dependency_closure(test.as_str(), model, None);
    let weights = config.weights();
    let mut stats = Vec::new();
    for name in &closure {
        let Some(e) = model.iter().find(|e| &e.qualified_name == name) else {
            continue;
        };
        if e.kind != ElementKind::Method || is_test_element(e, &config.migration.test_paths) {
            continue;
        }
        let rel = relevance(e, test, matrix).unwrap_or(0.0);
        let changes = count_historical_changes(
            e,
            fix_index,
            &mut model_at,
            config.potential.window,
            &weights,
        );
        stats.push(MethodChangeStat {
            element: e.clone(),
            relevance: rel,
            changes,
        });
    }
    stats
}

/// A store-backed pipeline over one repository.
pub struct RepoPipeline<S, R> {
    pub repo_name: String,
    pub store: S,
    pub runner: R,
    pub history: CommitHistory,
    pub config: MinerConfig,
    pub shared_cache: Arc<SharedFeedbackCache>,
    models: std::collections::HashMap<usize, Arc<Vec<CodeElement>>>,
}

impl<S, R> RepoPipeline<S, R>
where
    S: RevisionStore + Clone,
    R: TreeRunner + Clone,
{
    pub fn new(
        repo_name: impl Into<String>,
        store: S,
        runner: R,
        history: CommitHistory,
        config: MinerConfig,
        shared_cache: Arc<SharedFeedbackCache>,
    ) -> Self {
        Self {
            repo_name: repo_name.into(),
            store,
            runner,
            history,
            config,
            shared_cache,
            models: Default::default(),
        }
    }

    pub fn model(&mut self, index: usize) -> Arc<Vec<CodeElement>> {
        if let Some(m) = self.models.get(&index) {
            return m.clone();
        }
        let m = match self.store.tree(index) {
            Ok(tree) => {
                let (elements, _errors) =
                    regress_core::dsl::parse_revision(&tree, &regress_core::dsl::DslParser);
                Arc::new(elements)
            }
            Err(_) => Arc::new(Vec::new()),
        };
        self.models.insert(index, m.clone());
        m
    }

    fn evaluator(
        &self,
        fix_index: usize,
        test: &TestId,
    ) -> anyhow::Result<SharedCachedEvaluator<MigratingEvaluator<S, R>>> {
        let settings = self.config.migration_settings()?;
        Ok(SharedCachedEvaluator::new(
            MigratingEvaluator::new(
                self.store.clone(),
                self.runner.clone(),
                fix_index,
                test.clone(),
                settings,
            ),
            Arc::clone(&self.shared_cache),
        ))
    }

    /// Candidate discovery and scoring (the `rank` surface). Only confirmed
    /// fixes are scored; unconfirmed candidates come back in the reports.
    pub fn score_candidates(
        &mut self,
    ) -> anyhow::Result<(Vec<ScoredCandidate>, Vec<CandidateReport>, u64)> {
        let test_paths = self.config.migration.test_paths.clone();
        let commits = self.history.commits.clone();
        let candidates = {
            let mut out = Vec::new();
            for (k, commit) in commits.iter().enumerate().skip(1) {
                let prev_model = self.model(k - 1);
                let cur_model = self.model(k);
                let prev: BTreeSet<String> = prev_model
                    .iter()
                    .map(|e| e.qualified_name.clone())
                    .collect();
                for e in cur_model.iter() {
                    if e.kind == ElementKind::Method
                        && is_test_element(e, &test_paths)
                        && !prev.contains(&e.qualified_name)
                    {
                        out.push((commit.clone(), TestId::new(e.qualified_name.clone())));
                    }
                }
            }
            out
        };

        let mut scored = Vec::new();
        let mut reports = Vec::new();
        let mut fresh = 0u64;
        for (commit, test) in candidates {
            let mut eval = self.evaluator(commit.index, &test)?;
            let prev = self.history.commits[commit.index - 1].clone();
            let confirmed =
                match regress_core::search::confirm_fix(&test, &commit, &prev, &mut eval) {
                    Ok(c) => c,
                    Err(e) => {
                        reports.push(CandidateReport {
                            commit: commit.clone(),
                            test: test.clone(),
                            score: None,
                            outcome: CandidateOutcome::Error {
                                message: e.to_string(),
                            },
                        });
                        continue;
                    }
                };
            fresh += eval.fresh_evaluations();
            if !confirmed {
                reports.push(CandidateReport {
                    commit,
                    test,
                    score: None,
                    outcome: CandidateOutcome::NotAFix,
                });
                continue;
            }

            let model = self.model(commit.index);
            let matrix = build_matrix(&model, &self.config.migration.test_paths);
            let config = self.config.clone();
            let mut model_at = |k: usize| self.model(k);
            let stats = method_stats(
                &test,
                commit.index,
                &model,
                &matrix,
                &mut model_at,
                &config,
            );
            let score = regression_potential(&stats, config.potential.p);
            scored.push(ScoredCandidate {
                commit,
                test,
                score,
                n_methods: stats.len(),
                total_changes: stats.iter().map(|s| s.changes as u64).sum(),
            });
        }
        Ok((scored, reports, fresh))
    }

    /// The full pipeline: discovery → confirmation → ranking → search.
    /// Searches run in rank order, best candidate first.
    pub fn mine(&mut self) -> anyhow::Result<MineOutcome> {
        let (mut scored, mut reports, mut fresh) = self.score_candidates()?;
        scored.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.commit.index.cmp(&b.commit.index))
                .then_with(|| a.test.cmp(&b.test))
        });

        let mut records = Vec::new();
        let mut traces = Vec::new();
        for cand in &scored {
            if cand.score < self.config.potential.th_rp {
                reports.push(CandidateReport {
                    commit: cand.commit.clone(),
                    test: cand.test.clone(),
                    score: Some(cand.score),
                    outcome: CandidateOutcome::LowPotential { score: cand.score },
                });
                continue;
            }
            let (report, record, trace, spent) = self.search_candidate(cand)?;
            fresh += spent;
            if let Some(r) = record {
                records.push(r);
            }
            if let Some((name, t)) = trace {
                traces.push((name, t));
            }
            reports.push(report);
        }
        Ok(MineOutcome {
            repo: self.repo_name.clone(),
            records,
            reports,
            traces,
            fresh_evaluations: fresh,
        })
    }

    /// Confirm-and-search one explicit (commit, test) pair, bypassing the
    /// rank filter (the `search` subcommand).
    #[allow(clippy::type_complexity)]
    pub fn search_single(
        &mut self,
        commit: &CommitId,
        test: &TestId,
    ) -> anyhow::Result<(
        CandidateReport,
        Option<RegressionRecord>,
        Option<(String, SearchTrace)>,
    )> {
        let mut eval = self.evaluator(commit.index, test)?;
        let prev = self.history.commits[commit.index - 1].clone();
        let confirmed = regress_core::search::confirm_fix(test, commit, &prev, &mut eval)
            .map_err(anyhow::Error::msg)?;
        if !confirmed {
            return Ok((
                CandidateReport {
                    commit: commit.clone(),
                    test: test.clone(),
                    score: None,
                    outcome: CandidateOutcome::NotAFix,
                },
                None,
                None,
            ));
        }
        let cand = ScoredCandidate {
            commit: commit.clone(),
            test: test.clone(),
            score: 1.0,
            n_methods: 0,
            total_changes: 0,
        };
        let (report, record, trace, _spent) = self.search_candidate(&cand)?;
        Ok((report, record, trace))
    }

    #[allow(clippy::type_complexity)]
    fn search_candidate(
        &mut self,
        cand: &ScoredCandidate,
    ) -> anyhow::Result<(
        CandidateReport,
        Option<RegressionRecord>,
        Option<(String, SearchTrace)>,
        u64,
    )> {
        let commit = &cand.commit;
        let test = &cand.test;
        let report = |outcome: CandidateOutcome| CandidateReport {
            commit: commit.clone(),
            test: test.clone(),
            score: Some(cand.score),
            outcome,
        };

        let mut eval = self.evaluator(commit.index, test)?;
        let tail = self.history.commits[commit.index - 1].clone();
        let trace_name = format!(
            "trace-{}-{}-{}",
            sanitize(&self.repo_name),
            &commit.id[..commit.id.len().min(12)],
            sanitize(test.as_str())
        );

        // establish the passing head: the oldest revision, or the feedback
        // revision closest to it when it cannot resolve the test
        let oldest = self.history.commits[0].clone();
        let head = if oldest.index == tail.index {
            return Ok((report(CandidateOutcome::NotRegression), None, None, eval.fresh_evaluations()));
        } else {
            match eval.evaluate(&oldest, test) {
                Err(e) => {
                    return Ok((
                        report(CandidateOutcome::Error { message: e.to_string() }),
                        None,
                        None,
                        eval.fresh_evaluations(),
                    ))
                }
                Ok(Feedback::Pass) => oldest,
                Ok(Feedback::Fail(_)) => {
                    return Ok((report(CandidateOutcome::NotRegression), None, None, eval.fresh_evaluations()))
                }
                Ok(Feedback::NoFeedback(_)) => {
                    let (rev, _probes) = match search_feedback_revision(
                        &oldest,
                        test,
                        &tail,
                        &self.history,
                        &mut eval,
                        self.config.budget(),
                    ) {
                        Ok(r) => r,
                        Err(e) => {
                            return Ok((
                                report(CandidateOutcome::Error { message: e.to_string() }),
                                None,
                                None,
                                eval.fresh_evaluations(),
                            ))
                        }
                    };
                    if rev.index == tail.index {
                        return Ok((
                            report(CandidateOutcome::MigrationFailed),
                            None,
                            None,
                            eval.fresh_evaluations(),
                        ));
                    }
                    match eval.evaluate(&rev, test) {
                        Ok(Feedback::Pass) => rev,
                        Ok(_) => {
                            return Ok((
                                report(CandidateOutcome::NotRegression),
                                None,
                                None,
                                eval.fresh_evaluations(),
                            ))
                        }
                        Err(e) => {
                            return Ok((
                                report(CandidateOutcome::Error { message: e.to_string() }),
                                None,
                                None,
                                eval.fresh_evaluations(),
                            ))
                        }
                    }
                }
            }
        };
        if head.index >= tail.index {
            return Ok((report(CandidateOutcome::NotRegression), None, None, eval.fresh_evaluations()));
        }

        // dispatch on the configured strategy
        let (found, trace) = match self.config.strategy.as_str() {
            "bisect" => match bisect_baseline(&head, &tail, test, &self.history, &mut eval) {
                Ok(r) => r,
                Err(SearchError::Precondition(m)) => {
                    return Ok((
                        report(CandidateOutcome::Error { message: m }),
                        None,
                        None,
                        eval.fresh_evaluations(),
                    ))
                }
                Err(SearchError::Eval(e)) => {
                    return Ok((
                        report(CandidateOutcome::Error { message: e.to_string() }),
                        None,
                        None,
                        eval.fresh_evaluations(),
                    ))
                }
            },
            "blame" => {
                let found = blame_baseline(commit, &self.history);
                let trace = SearchTrace {
                    visited: Vec::new(),
                    outcome: found
                        .clone()
                        .map(Outcome::FoundRic)
                        .unwrap_or(Outcome::NotRegression),
                    fresh_evaluations: 0,
                };
                (found, trace)
            }
            _ => match search_regression_inducing(
                &head,
                &tail,
                test,
                &self.history,
                &mut eval,
                self.config.budget(),
            ) {
                Ok(r) => r,
                Err(SearchError::Precondition(m)) => {
                    return Ok((
                        report(CandidateOutcome::Error { message: m }),
                        None,
                        None,
                        eval.fresh_evaluations(),
                    ))
                }
                Err(SearchError::Eval(e)) => {
                    return Ok((
                        report(CandidateOutcome::Error { message: e.to_string() }),
                        None,
                        None,
                        eval.fresh_evaluations(),
                    ))
                }
            },
        };

        let spent = eval.fresh_evaluations();
        let Some(ric) = found else {
            let outcome = match &trace.outcome {
                Outcome::Abandoned(AbandonReason::BudgetExhausted) => {
                    CandidateOutcome::BudgetExhausted
                }
                Outcome::Abandoned(AbandonReason::NoFeedbackBoundary { .. }) => {
                    CandidateOutcome::NoFeedbackBoundary
                }
                _ => CandidateOutcome::NotRegression,
            };
            return Ok((report(outcome), None, Some((trace_name, trace)), spent));
        };

        // replay invariant: Pass@rfc, Fail@rfc-1, Fail@ric, Pass@wc
        let wc = self.history.commits[ric.index - 1].clone();
        let replay_ok = eval.evaluate(commit, test)?.is_pass()
            && eval.evaluate(&tail, test)?.is_fail()
            && eval.evaluate(&ric, test)?.is_fail()
            && eval.evaluate(&wc, test)?.is_pass();
        if !replay_ok {
            let outcome = if self.config.strategy == "blame" {
                CandidateOutcome::BlameUnconfirmed
            } else {
                CandidateOutcome::IncompatibleFailure
            };
            return Ok((report(outcome), None, Some((trace_name, trace)), spent));
        }

        // compatibility of the two failures (§ the same root cause, on
        // similar target methods)
        if !self.failures_compatible(&mut eval, commit, &tail, &ric, test)? {
            return Ok((
                report(CandidateOutcome::IncompatibleFailure),
                None,
                Some((trace_name, trace)),
                spent,
            ));
        }

        let coverage = self.coverage_similarity(&mut eval, commit, &ric, test)?;
        let fingerprint = eval
            .inner()
            .migration_fingerprint_of(&ric)
            .map_err(anyhow::Error::msg)?
            .unwrap_or(0);
        let record = RegressionRecord {
            repo: self.repo_name.clone(),
            rfc: commit.clone(),
            ric: ric.clone(),
            wc,
            test: test.clone(),
            coverage_similarity: coverage,
            trace_ref: format!("{trace_name}.jsonl"),
            migrated_fingerprint: fingerprint,
        };
        Ok((
            report(CandidateOutcome::Mined),
            Some(record),
            Some((trace_name, trace)),
            spent,
        ))
    }

    /// Same-root-cause plus target-method compatibility between the failure
    /// at rfc-1 and the failure at ric.
    fn failures_compatible(
        &mut self,
        eval: &mut SharedCachedEvaluator<MigratingEvaluator<S, R>>,
        rfc: &CommitId,
        rfc_prev: &CommitId,
        ric: &CommitId,
        test: &TestId,
    ) -> anyhow::Result<bool> {
        let fb_prev = eval.evaluate(rfc_prev, test).map_err(anyhow::Error::msg)?;
        let fb_ric = eval.evaluate(ric, test).map_err(anyhow::Error::msg)?;
        let (Some(sig_prev), Some(sig_ric)) = (fb_prev.failure(), fb_ric.failure()) else {
            return Ok(false);
        };

        // the tested target: the first element the test's body references
        let model_rfc = self.model(rfc.index);
        let Some(test_elem) = model_rfc.iter().find(|e| e.qualified_name == *test.as_str()) else {
            return Ok(false);
        };
        let Some(target_name) = test_elem.references.iter().next() else {
            return Ok(false);
        };
        let Some(target) = model_rfc.iter().find(|e| &e.qualified_name == target_name) else {
            return Ok(false);
        };
        // the tested feature must look the same at the fixing and inducing
        // revisions: compare the target method at rfc with its counterpart
        // at ric
        let weights = self.config.weights();
        let model_ric = eval.inner().evaluated_model(ric).map_err(anyhow::Error::msg)?;
        let Some(model_ric) = model_ric else {
            return Ok(false);
        };
        let Some(target_ric) = reidentify(target, model_ric.iter(), &weights) else {
            return Ok(false);
        };
        Ok(regress_core::history::compatible_fail(
            sig_prev,
            sig_ric,
            target,
            target_ric,
            self.config.similarity.th_body,
        ))
    }

    /// Coverage overlap between the fixing revision and the (migrated)
    /// inducing revision, `None` when coverage cannot be obtained.
    fn coverage_similarity(
        &mut self,
        eval: &mut SharedCachedEvaluator<MigratingEvaluator<S, R>>,
        rfc: &CommitId,
        ric: &CommitId,
        test: &TestId,
    ) -> anyhow::Result<Option<f64>> {
        let model_rfc = self.model(rfc.index);
        let Some(model_ric) = eval.inner().evaluated_model(ric).map_err(anyhow::Error::msg)? else {
            return Ok(None);
        };
        let methods = |model: &[CodeElement], names: &BTreeSet<String>| -> BTreeSet<String> {
            names
                .iter()
                .filter(|n| {
                    model
                        .iter()
                        .any(|e| &e.qualified_name == *n && e.kind == ElementKind::Method)
                })
                .cloned()
                .collect()
        };
        let (cov_rfc, _u1) = dependency_closure(test.as_str(), &model_rfc, None);
        let (cov_ric, _u2) = dependency_closure(test.as_str(), &model_ric, None);
        let cov_rfc = methods(&model_rfc, &cov_rfc);
        let cov_ric = methods(&model_ric, &cov_ric);
        Ok(Some(feature_coverage_similarity(
            &cov_rfc,
            &cov_ric,
            &model_rfc,
            &model_ric,
            &self.config.weights(),
        )))
    }
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}
