//! Revision evaluation: from "does test t pass commit c" down to running a
//! (possibly migrated) working tree.
//!
//! [`RevisionStore`] abstracts where trees come from (synthetic repository,
//! checkout adapter); [`TreeRunner`] abstracts how a tree is executed (the
//! in-memory DSL runner, an external build command). [`MigratingEvaluator`]
//! glues them together: revisions predating the test get the test and its
//! dependencies migrated in before the runner sees them, and every runner
//! verdict is cached under `(commit, test, migration fingerprint)`.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::dsl::{parse_revision, DslParser};
use crate::history::{
    CommitId, EvalError, Evaluate, Feedback, FeedbackCache, NoFeedbackReason, TestId,
};
use crate::migrate::{
    plan_migration, reconcile, Attempt, EnvironmentMetadata, MigratedRevision, MigrationPlan,
    ReconcileError, RewriteRule,
};
use crate::model::{CodeElement, SimilarityWeights};
use crate::text::fnv1a64;
use crate::tree::SourceTree;

/// Source of revision trees and environment metadata, indexed like the
/// linearized history.
pub trait RevisionStore {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn commit(&self, index: usize) -> &CommitId;
    fn tree(&mut self, index: usize) -> Result<Arc<SourceTree>, EvalError>;
    fn env(&mut self, index: usize) -> EnvironmentMetadata;
}

/// Executes a test against one working tree.
pub trait TreeRunner {
    fn run(
        &mut self,
        tree: &SourceTree,
        env: &EnvironmentMetadata,
        test: &TestId,
    ) -> Result<Feedback, EvalError>;
}

/// What gets copied into revisions that predate the test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MigrationMode {
    /// Full dependency analysis and reconciliation.
    Full,
    /// Copy only the test element itself (the "no dependency migration"
    /// ablation).
    TestOnly,
}

/// Similarity weights, rewrite rules, and test-location hints used by
/// migration-aware evaluation.
#[derive(Debug, Clone)]
pub struct MigrationSettings {
    pub weights: SimilarityWeights,
    pub rules: Vec<RewriteRule>,
    pub test_paths: Vec<String>,
    pub mode: MigrationMode,
}

impl Default for MigrationSettings {
    fn default() -> Self {
        Self {
            weights: SimilarityWeights::default(),
            rules: crate::migrate::parse_rules(crate::migrate::DEFAULT_RULES)
                .expect("default rule file parses"),
            test_paths: alloc::vec!["src/test".into(), "test/".into()],
            mode: MigrationMode::Full,
        }
    }
}

fn tree_fingerprint(tree: &SourceTree) -> u64 {
    let mut buf = String::new();
    for (path, content) in tree.iter() {
        buf.push_str(path);
        buf.push('\x1f');
        buf.push_str(content);
        buf.push('\x1e');
    }
    let h = fnv1a64(buf.as_bytes());
    // 0 is reserved for "no migration"
    if h == 0 {
        1
    } else {
        h
    }
}

/// Outcome of one reconciliation run: the decision-tree result, or an
/// evaluation-infrastructure error.
pub type ReconcileOutcome =
    Result<Result<(Option<MigratedRevision>, Vec<Attempt>), ReconcileError>, EvalError>;

/// Evaluator that migrates the test into revisions older than the fixing
/// commit before running them.
///
/// Models, migration plans, and feedback are all memoized; repeated
/// evaluation of the same revision costs no runner invocations.
pub struct MigratingEvaluator<S, R> {
    store: S,
    runner: R,
    settings: MigrationSettings,
    /// Index of the commit the test (and its dependencies) come from.
    fix_index: usize,
    test: TestId,
    models: BTreeMap<usize, Arc<Vec<CodeElement>>>,
    plans: BTreeMap<usize, Arc<MigrationPlan>>,
    memo: FeedbackCache,
    probe_cache: FeedbackCache,
    fresh: u64,
    /// Fingerprint of the successful migration per revision index.
    fingerprints: BTreeMap<usize, u64>,
}

impl<S: RevisionStore, R: TreeRunner> MigratingEvaluator<S, R> {
    pub fn new(store: S, runner: R, fix_index: usize, test: TestId, settings: MigrationSettings) -> Self {
        Self {
            store,
            runner,
            settings,
            fix_index,
            test,
            models: BTreeMap::new(),
            plans: BTreeMap::new(),
            memo: FeedbackCache::new(),
            probe_cache: FeedbackCache::new(),
            fresh: 0,
            fingerprints: BTreeMap::new(),
        }
    }

    pub fn store(&mut self) -> &mut S {
        &mut self.store
    }

    pub fn cache_hits(&self) -> u64 {
        self.memo.hits() + self.probe_cache.hits()
    }

    /// Migration fingerprint recorded for a revision, if one succeeded.
    pub fn fingerprint_of(&self, index: usize) -> Option<u64> {
        self.fingerprints.get(&index).copied()
    }

    /// Like [`Self::fingerprint_of`], but reconciles on demand when no
    /// fingerprint has been recorded yet (e.g. the evaluation itself was
    /// answered by an outer cache). Returns 0 for revisions at or after the
    /// fixing commit, which are never migrated.
    pub fn migration_fingerprint_of(&mut self, rev: &CommitId) -> Result<Option<u64>, EvalError> {
        if rev.index >= self.fix_index {
            return Ok(Some(0));
        }
        if let Some(fp) = self.fingerprints.get(&rev.index) {
            return Ok(Some(*fp));
        }
        match self.reconcile_revision(rev)? {
            Ok((Some(mr), _)) => {
                self.fingerprints.insert(rev.index, mr.fingerprint);
                Ok(Some(mr.fingerprint))
            }
            Ok((None, _)) | Err(ReconcileError::Migrate(_)) => Ok(None),
            Err(ReconcileError::Eval(e)) => Err(e),
        }
    }

    /// Lazily parsed (lenient) element model of a revision's own tree.
    pub fn model(&mut self, index: usize) -> Result<Arc<Vec<CodeElement>>, EvalError> {
        if let Some(m) = self.models.get(&index) {
            return Ok(m.clone());
        }
        let tree = self.store.tree(index)?;
        let (elements, _errors) = parse_revision(&tree, &DslParser);
        let arc = Arc::new(elements);
        self.models.insert(index, arc.clone());
        Ok(arc)
    }

    /// The migration plan for evaluating the test on an older revision.
    pub fn plan(&mut self, index: usize) -> Result<Arc<MigrationPlan>, EvalError> {
        if let Some(p) = self.plans.get(&index) {
            return Ok(p.clone());
        }
        let plan = match self.settings.mode {
            MigrationMode::Full => {
                let bfc_model = self.model(self.fix_index)?;
                let bfc_prev_model = if self.fix_index > 0 {
                    self.model(self.fix_index - 1)?
                } else {
                    Arc::new(Vec::new())
                };
                let c_inv_model = self.model(index)?;
                plan_migration(
                    &bfc_model,
                    &bfc_prev_model,
                    &c_inv_model,
                    self.test.as_str(),
                    None,
                    &self.settings.weights,
                    &self.settings.test_paths,
                )
            }
            MigrationMode::TestOnly => {
                let mut p = MigrationPlan::default();
                p.e_miss.insert(self.test.as_str().into());
                p
            }
        };
        let arc = Arc::new(plan);
        self.plans.insert(index, arc.clone());
        Ok(arc)
    }

    /// Runs the full reconciliation decision tree for one old revision.
    fn reconcile_revision(&mut self, rev: &CommitId) -> ReconcileOutcome {
        let index = rev.index;
        let env = self.store.env(index);
        let env_bfc = self.store.env(self.fix_index);
        let tree = self.store.tree(index)?;
        let plan = self.plan(index)?;
        let bfc_model = self.model(self.fix_index)?;
        let sources: BTreeMap<String, CodeElement> = bfc_model
            .iter()
            .map(|e| (e.qualified_name.clone(), e.clone()))
            .collect();

        // split borrows: the probe closure owns runner/cache/counter access
        let Self {
            runner,
            probe_cache,
            fresh,
            test,
            settings,
            ..
        } = self;
        let commit_id = rev.id.clone();
        let mut probe = |t: &SourceTree| -> Result<Feedback, EvalError> {
            let fp = tree_fingerprint(t);
            if let Some(fb) = probe_cache.get(&commit_id, test, fp) {
                return Ok(fb);
            }
            let fb = runner.run(t, &env, test)?;
            *fresh += 1;
            probe_cache.insert(&commit_id, test, fp, fb.clone());
            Ok(fb)
        };
        let outcome = reconcile(
            &plan,
            &sources,
            &rev.id,
            &tree,
            &settings.rules,
            &env,
            &env_bfc,
            &mut probe,
        );
        if let Err(ReconcileError::Eval(e)) = outcome {
            return Err(e);
        }
        Ok(outcome)
    }

    fn run_direct(&mut self, rev: &CommitId) -> Result<Feedback, EvalError> {
        let env = self.store.env(rev.index);
        let tree = self.store.tree(rev.index)?;
        let fp = tree_fingerprint(&tree);
        if let Some(fb) = self.probe_cache.get(&rev.id, &self.test, fp) {
            return Ok(fb);
        }
        let fb = self.runner.run(&tree, &env, &self.test)?;
        self.fresh += 1;
        let test = self.test.clone();
        self.probe_cache.insert(&rev.id, &test, fp, fb.clone());
        Ok(fb)
    }

    fn evaluate_uncached(&mut self, rev: &CommitId) -> Result<Feedback, EvalError> {
        if rev.index >= self.fix_index {
            return self.run_direct(rev);
        }
        match self.reconcile_revision(rev)? {
            Ok((Some(mr), _attempts)) => {
                self.fingerprints.insert(rev.index, mr.fingerprint);
                let test = self.test.clone();
                self.probe_cache
                    .insert(&rev.id, &test, mr.fingerprint, mr.feedback.clone());
                Ok(mr.feedback)
            }
            Ok((None, attempts)) => Ok(attempts
                .last()
                .map(|a| a.feedback.clone())
                .unwrap_or(Feedback::NoFeedback(NoFeedbackReason::TestUnresolvable))),
            Err(ReconcileError::Migrate(_)) => {
                Ok(Feedback::NoFeedback(NoFeedbackReason::CompileError))
            }
            Err(ReconcileError::Eval(e)) => Err(e),
        }
    }

    /// The tree the runner actually sees for a revision: the revision's own
    /// tree at or after the fixing commit, the reconciled tree before it
    /// (`None` when reconciliation fails). Probes are cached, so calling
    /// this after a search costs no runner invocations.
    pub fn evaluated_tree(&mut self, rev: &CommitId) -> Result<Option<SourceTree>, EvalError> {
        if rev.index >= self.fix_index {
            return Ok(Some(self.store.tree(rev.index)?.as_ref().clone()));
        }
        match self.reconcile_revision(rev)? {
            Ok((Some(mr), _)) => Ok(Some(mr.tree)),
            Ok((None, _)) | Err(ReconcileError::Migrate(_)) => Ok(None),
            Err(ReconcileError::Eval(e)) => Err(e),
        }
    }

    /// The element model of [`Self::evaluated_tree`].
    pub fn evaluated_model(
        &mut self,
        rev: &CommitId,
    ) -> Result<Option<Arc<Vec<CodeElement>>>, EvalError> {
        if rev.index >= self.fix_index {
            return self.model(rev.index).map(Some);
        }
        match self.evaluated_tree(rev)? {
            Some(tree) => {
                let (elements, _errors) = parse_revision(&tree, &DslParser);
                Ok(Some(Arc::new(elements)))
            }
            None => Ok(None),
        }
    }
}

impl<S: RevisionStore, R: TreeRunner> Evaluate for MigratingEvaluator<S, R> {
    fn evaluate(&mut self, rev: &CommitId, test: &TestId) -> Result<Feedback, EvalError> {
        debug_assert_eq!(test, &self.test, "one evaluator serves one test");
        if let Some(fb) = self.memo.get(&rev.id, test, 0) {
            return Ok(fb);
        }
        let fb = self.evaluate_uncached(rev)?;
        self.memo.insert(&rev.id, test, 0, fb.clone());
        Ok(fb)
    }

    fn fresh_evaluations(&self) -> u64 {
        self.fresh
    }
}
