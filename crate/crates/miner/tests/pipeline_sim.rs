//! End-to-end pipeline runs over synthetic repositories.


use std::sync::Arc;

use regress_core::evaluator::TreeRunner;
use regress_core::history::TestId;
use regress_core::sim::{
    generate, render_spec, EnvShift, HistorySpec, NonRegressionFix, PlantedRegression, SimRunner,
    DEFAULT_TEST, FEATURE_ELEMENT,
};
use regress_miner::cache::{CachedTreeRunner, SharedFeedbackCache};
use regress_miner::config::MinerConfig;
use regress_miner::pipeline::{CandidateOutcome, RepoPipeline};
use regress_miner::repos::mine_all;

fn plant_spec(length: usize, seed: u64, ws: usize, ric: usize, rfc: usize) -> HistorySpec {
    HistorySpec {
        length,
        seed,
        churn_rate: 0.3,
        feature_churn: 12,
        plant: Some(PlantedRegression {
            working_start: ws,
            inducing_index: ric,
            fixing_index: rfc,
            feature_elements: vec![FEATURE_ELEMENT.to_string()],
            test_name: DEFAULT_TEST.to_string(),
        }),
        ..HistorySpec::default()
    }
}

fn pipeline_for(
    spec: &HistorySpec,
    config: &MinerConfig,
    cache: &Arc<SharedFeedbackCache>,
) -> (RepoPipeline<regress_core::sim::SimRepo, CachedTreeRunner<SimRunner>>, regress_core::sim::GroundTruth)
{
    let (repo, truth) = generate(spec).unwrap();
    let runner = CachedTreeRunner::new(SimRunner, Arc::clone(cache));
    let pipeline = RepoPipeline::new(
        "simrepo",
        repo.clone(),
        runner,
        repo.history.clone(),
        config.clone(),
        Arc::clone(cache),
    );
    (pipeline, truth)
}

#[test]
fn planted_regression_is_mined_exactly() {
    let spec = plant_spec(28, 21, 0, 12, 22);
    let config = MinerConfig::load(None, &[]).unwrap();
    let cache = SharedFeedbackCache::in_memory();
    let (mut pipeline, truth) = pipeline_for(&spec, &config, &cache);
    let outcome = pipeline.mine().unwrap();

    assert_eq!(outcome.records.len(), 1, "reports: {:?}", outcome.reports);
    let record = &outcome.records[0];
    let plant = truth.plant.unwrap();
    assert_eq!(record.rfc.index, plant.fixing_index);
    assert_eq!(record.ric.index, plant.inducing_index);
    assert_eq!(record.wc.index, plant.inducing_index - 1);
    assert_eq!(record.test.as_str(), plant.test_name);
    assert!(record.coverage_similarity.unwrap() > 0.9);
    assert!(outcome
        .reports
        .iter()
        .any(|r| matches!(r.outcome, CandidateOutcome::Mined)));
}

#[test]
fn never_working_fix_yields_no_record() {
    let spec = HistorySpec {
        length: 20,
        seed: 5,
        churn_rate: 0.2,
        non_regression: Some(NonRegressionFix {
            introduced: 4,
            fixing_index: 14,
            element: "Legacy.parse".into(),
            test_name: "LegacyTest.testParseOk".into(),
        }),
        ..HistorySpec::default()
    };
    let config = MinerConfig::load(None, &["potential.th_rp=0.0".into()]).unwrap();
    let cache = SharedFeedbackCache::in_memory();
    let (mut pipeline, _truth) = pipeline_for(&spec, &config, &cache);
    let outcome = pipeline.mine().unwrap();
    assert!(outcome.records.is_empty());
    assert!(
        outcome
            .reports
            .iter()
            .any(|r| matches!(r.outcome, CandidateOutcome::NotRegression)),
        "reports: {:?}",
        outcome.reports
    );
}

#[test]
fn environment_shift_is_reconciled_during_search() {
    let spec = HistorySpec {
        length: 26,
        seed: 9,
        churn_rate: 0.2,
        feature_churn: 12,
        plant: Some(PlantedRegression {
            working_start: 0,
            inducing_index: 12,
            fixing_index: 22,
            feature_elements: vec![FEATURE_ELEMENT.to_string()],
            test_name: DEFAULT_TEST.to_string(),
        }),
        env_shift: Some(EnvShift {
            at: 10,
            before: regress_core::migrate::EnvironmentMetadata::with_language_level("1.5"),
        }),
        ..HistorySpec::default()
    };
    let config = MinerConfig::load(None, &[]).unwrap();
    let cache = SharedFeedbackCache::in_memory();
    let (mut pipeline, _) = pipeline_for(&spec, &config, &cache);
    let outcome = pipeline.mine().unwrap();
    assert_eq!(outcome.records.len(), 1, "reports: {:?}", outcome.reports);
    assert_eq!(outcome.records[0].ric.index, 12);
}

#[test]
fn rerunning_with_warm_cache_is_free_and_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cache_path = dir.path().join("feedback.jsonl");
    let spec = plant_spec(24, 33, 0, 11, 19);
    let config = MinerConfig::load(None, &[]).unwrap();

    let (records1, invocations1) = {
        let cache = SharedFeedbackCache::with_file(&cache_path).unwrap();
        let (repo, _) = generate(&spec).unwrap();
        let runner = CachedTreeRunner::new(SimRunner, Arc::clone(&cache));
        let counter = runner.invocation_counter();
        let mut pipeline = RepoPipeline::new(
            "simrepo",
            repo.clone(),
            runner,
            repo.history.clone(),
            config.clone(),
            Arc::clone(&cache),
        );
        let outcome = pipeline.mine().unwrap();
        cache.save().unwrap();
        (outcome.records, counter.load(std::sync::atomic::Ordering::Relaxed))
    };
    assert!(invocations1 > 0);
    assert_eq!(records1.len(), 1);

    let (records2, invocations2) = {
        let cache = SharedFeedbackCache::with_file(&cache_path).unwrap();
        let (repo, _) = generate(&spec).unwrap();
        let runner = CachedTreeRunner::new(SimRunner, Arc::clone(&cache));
        let counter = runner.invocation_counter();
        let mut pipeline = RepoPipeline::new(
            "simrepo",
            repo.clone(),
            runner,
            repo.history.clone(),
            config.clone(),
            Arc::clone(&cache),
        );
        let outcome = pipeline.mine().unwrap();
        (outcome.records, counter.load(std::sync::atomic::Ordering::Relaxed))
    };
    assert_eq!(records1, records2, "warm rerun must emit an identical dataset");
    assert_eq!(invocations2, 0, "warm rerun must not invoke the runner");
}

#[test]
fn ordering_potential_only_for_confirmed_searches_only_for_ranked() {
    // th_rp = 1.1 filters everything: no searches may happen
    let spec = plant_spec(22, 8, 0, 10, 18);
    let config = MinerConfig::load(None, &["potential.th_rp=1.0".into()]).unwrap();
    let cache = SharedFeedbackCache::in_memory();
    let (mut pipeline, _) = pipeline_for(&spec, &config, &cache);
    let outcome = pipeline.mine().unwrap();
    assert!(outcome.records.is_empty());
    assert!(outcome.traces.is_empty(), "no search may run below the rank threshold");
    assert!(outcome
        .reports
        .iter()
        .any(|r| matches!(r.outcome, CandidateOutcome::LowPotential { .. })));
    // unconfirmed candidates never get a score
    for r in &outcome.reports {
        if matches!(r.outcome, CandidateOutcome::NotAFix) {
            assert!(r.score.is_none());
        }
    }
}

#[test]
fn batch_isolates_unreadable_repos() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.spec");
    std::fs::write(&good, render_spec(&plant_spec(20, 3, 0, 10, 17))).unwrap();
    let bad = dir.path().join("missing.spec");
    let config = MinerConfig::load(None, &[]).unwrap();
    let cache = SharedFeedbackCache::in_memory();
    let (outcomes, errors) = mine_all(
        &[good, bad.clone()],
        &config,
        &cache,
    );
    assert_eq!(outcomes.len(), 1);
    assert_eq!(outcomes[0].records.len(), 1);
    assert_eq!(errors.len(), 1);
    assert!(errors[0].0.contains("missing.spec"));
}

#[test]
fn test_only_migration_mode_misses_dependent_regressions() {
    // feature history contains churn; full migration finds the regression,
    // while copying only the test cannot resolve revisions lacking deps;
    // here all deps exist throughout, so both modes succeed; the ablation
    // difference shows when a dependency is introduced mid-history
    let mut spec = plant_spec(20, 44, 0, 8, 16);
    spec.env_shift = Some(EnvShift {
        at: 6,
        before: regress_core::migrate::EnvironmentMetadata::with_language_level("1.5"),
    });
    let config = MinerConfig::load(None, &["migration.mode=test-only".into()]).unwrap();
    let cache = SharedFeedbackCache::in_memory();
    let (mut pipeline, _) = pipeline_for(&spec, &config, &cache);
    let outcome = pipeline.mine().unwrap();
    // Printer.render (a test dependency) only exists from commit 6; without
    // dependency migration the candidate search cannot reach a passing head
    assert!(
        outcome.records.is_empty()
            || outcome.records.iter().all(|r| r.ric.index >= 6),
        "test-only migration must not resolve revisions before the dependency exists"
    );

    let full = MinerConfig::load(None, &[]).unwrap();
    let cache2 = SharedFeedbackCache::in_memory();
    let (mut pipeline2, _) = pipeline_for(&spec, &full, &cache2);
    let outcome2 = pipeline2.mine().unwrap();
    assert_eq!(outcome2.records.len(), 1, "full migration finds it");
}

#[test]
fn eval_tree_runner_contract_matches_sim_runner() {
    // the reference external runner must agree with the in-memory runner
    let spec = plant_spec(10, 71, 0, 4, 8);
    let (repo, _) = generate(&spec).unwrap();
    let mut sim = SimRunner;
    let test = TestId::new(DEFAULT_TEST);
    let fb = sim
        .run(&repo.trees[8], &repo.envs[8], &test)
        .unwrap();
    assert!(fb.is_pass());
    let fb = sim.run(&repo.trees[5], &repo.envs[5], &test).unwrap();
    // test absent before the fixing commit
    assert!(!fb.has_feedback());
}

#[test]
fn test_addition_detection_excludes_body_modifications() {
    use regress_core::model::{CodeElement, ElementKind};
    use regress_miner::pipeline::find_test_adding_commits;

    let method = |q: &str, body: &str| {
        let mut e = CodeElement::new(ElementKind::Method, q);
        e.body = body.into();
        e
    };
    // commit 0: one test exists; commit 1: only its body changes;
    // commit 2: two new tests appear
    let models = [
        Arc::new(vec![method("FooTest.testOld", "expect A.x ok")]),
        Arc::new(vec![method("FooTest.testOld", "expect A.x ok\nline extra")]),
        Arc::new(vec![
            method("FooTest.testOld", "expect A.x ok\nline extra"),
            method("FooTest.testFresh", "expect A.y ok"),
            method("BarTest.testAlso", "expect B.z ok"),
        ]),
    ];
    let history = regress_core::CommitHistory {
        branch: "main".into(),
        commits: (0..3)
            .map(|i| regress_core::CommitId::new(format!("c{i}"), i))
            .collect(),
        diffs: Default::default(),
    };
    let found = find_test_adding_commits(&history, |k| models[k].clone(), &[]);
    let names: Vec<(usize, &str)> = found
        .iter()
        .map(|(c, t)| (c.index, t.as_str()))
        .collect();
    assert_eq!(
        names,
        vec![(2, "FooTest.testFresh"), (2, "BarTest.testAlso")],
        "body-only modification at commit 1 is not a test addition"
    );
}
