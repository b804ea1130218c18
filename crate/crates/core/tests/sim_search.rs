//! End-to-end checks of the synthetic harness against the searches: planted
//! regressions replay to their expected pass/fail patterns, and the
//! feedback-aware search agrees with the brute-force oracle.

use regress_core::evaluator::MigrationSettings;
use regress_core::history::{Evaluate, Feedback, TestId};
use regress_core::search::{
    bisect_baseline, query_count, search_feedback_revision, search_regression_inducing,
    AbandonReason, Outcome, SearchBudget,
};
use regress_core::sim::{
    generate, linear_scan_oracle, HistorySpec, PlantedRegression, SplitMix64, DEFAULT_TEST,
    FEATURE_ELEMENT,
};

fn plant(ws: usize, ric: usize, rfc: usize) -> PlantedRegression {
    PlantedRegression {
        working_start: ws,
        inducing_index: ric,
        fixing_index: rfc,
        feature_elements: vec![FEATURE_ELEMENT.to_string()],
        test_name: DEFAULT_TEST.to_string(),
    }
}

fn spec_with_plant(length: usize, seed: u64, ws: usize, ric: usize, rfc: usize) -> HistorySpec {
    HistorySpec {
        length,
        seed,
        churn_rate: 0.3,
        plant: Some(plant(ws, ric, rfc)),
        ..HistorySpec::default()
    }
}

#[test]
fn planted_regression_replays_to_expected_pattern() {
    let spec = spec_with_plant(8, 11, 1, 3, 6);
    let (repo, _truth) = generate(&spec).unwrap();
    let test = TestId::new(DEFAULT_TEST);
    let mut eval = repo.evaluator(6, &test, MigrationSettings::default());
    let scan = linear_scan_oracle(&repo.history, &test, &mut eval).unwrap();
    let pattern: String = scan
        .feedbacks
        .iter()
        .map(|f| match f {
            Feedback::Pass => 'P',
            Feedback::Fail(_) => 'F',
            Feedback::NoFeedback(_) => 'N',
        })
        .collect();
    assert_eq!(pattern, "PPPFFFPP");
    assert_eq!(scan.first_fail(), Some(3));
}

#[test]
fn identical_seeds_generate_identical_trees() {
    let spec = spec_with_plant(12, 99, 0, 4, 9);
    let (a, _) = generate(&spec).unwrap();
    let (b, _) = generate(&spec).unwrap();
    for (ta, tb) in a.trees.iter().zip(b.trees.iter()) {
        assert_eq!(ta.as_ref(), tb.as_ref());
    }
    let (c, _) = generate(&HistorySpec {
        seed: 100,
        ..spec.clone()
    })
    .unwrap();
    assert!(
        a.trees.iter().zip(c.trees.iter()).any(|(x, y)| x != y),
        "different seeds should differ somewhere"
    );
}

#[test]
fn search_matches_oracle_on_clean_histories() {
    let mut rng = SplitMix64::new(2024);
    for round in 0..40 {
        let length = 8 + rng.below(120);
        let rfc = length - 1 - rng.below(3.min(length - 4));
        let ric = 2 + rng.below(rfc - 3);
        let spec = spec_with_plant(length, 5000 + round, 0, ric, rfc);
        let (repo, _) = generate(&spec).unwrap();
        let test = TestId::new(DEFAULT_TEST);

        let mut eval = repo.evaluator(rfc, &test, MigrationSettings::default());
        let head = repo.history.get(0).unwrap().clone();
        let tail = repo.history.get(rfc - 1).unwrap().clone();
        let (found, trace) = search_regression_inducing(
            &head,
            &tail,
            &test,
            &repo.history,
            &mut eval,
            SearchBudget::default(),
        )
        .unwrap();

        let mut oracle_eval = repo.evaluator(rfc, &test, MigrationSettings::default());
        let scan = linear_scan_oracle(&repo.history, &test, &mut oracle_eval).unwrap();
        assert_eq!(
            found.as_ref().map(|c| c.index),
            scan.first_fail(),
            "round {round}: length {length} ric {ric} rfc {rfc}"
        );
        assert_eq!(found.as_ref().map(|c| c.index), Some(ric));
        assert!(matches!(trace.outcome, Outcome::FoundRic(_)));
    }
}

#[test]
fn search_cost_is_logarithmic_on_clean_histories() {
    for (length, seed) in [(64usize, 1u64), (128, 2), (256, 3)] {
        let rfc = length - 2;
        let ric = length / 3;
        let spec = spec_with_plant(length, seed, 0, ric, rfc);
        let (repo, _) = generate(&spec).unwrap();
        let test = TestId::new(DEFAULT_TEST);
        let mut eval = repo.evaluator(rfc, &test, MigrationSettings::default());
        let head = repo.history.get(0).unwrap().clone();
        let tail = repo.history.get(rfc - 1).unwrap().clone();
        let (found, trace) = search_regression_inducing(
            &head,
            &tail,
            &test,
            &repo.history,
            &mut eval,
            SearchBudget::default(),
        )
        .unwrap();
        assert_eq!(found.unwrap().index, ric);
        let bound = (length as f64).log2().ceil() as u64 + 2;
        assert!(
            query_count(&trace) <= bound,
            "length {length}: {} probes > {bound}",
            query_count(&trace)
        );
        assert!(query_count(&trace) < length as u64);

        // a repeated search costs nothing new
        let (_, trace2) = search_regression_inducing(
            &head,
            &tail,
            &test,
            &repo.history,
            &mut eval,
            SearchBudget::default(),
        )
        .unwrap();
        assert_eq!(query_count(&trace2), 0);
    }
}

#[test]
fn bisect_matches_search_on_clean_histories() {
    for seed in 0..10u64 {
        let spec = spec_with_plant(40, seed, 0, 5 + (seed as usize % 20), 38);
        let (repo, _) = generate(&spec).unwrap();
        let test = TestId::new(DEFAULT_TEST);
        let head = repo.history.get(0).unwrap().clone();
        let tail = repo.history.get(37).unwrap().clone();

        let mut e1 = repo.evaluator(38, &test, MigrationSettings::default());
        let (a, _) = search_regression_inducing(
            &head,
            &tail,
            &test,
            &repo.history,
            &mut e1,
            SearchBudget::default(),
        )
        .unwrap();
        let mut e2 = repo.evaluator(38, &test, MigrationSettings::default());
        let (b, _) = bisect_baseline(&head, &tail, &test, &repo.history, &mut e2).unwrap();
        assert_eq!(a.map(|c| c.index), b.map(|c| c.index));
    }
}

#[test]
fn no_feedback_regions_are_skipped_soundly() {
    // region [14, 23] lies before the flip at 26: the search hops over it
    // and still finds the exact inducing commit
    let mut spec = spec_with_plant(36, 7, 0, 26, 30);
    spec.nf_regions = vec![(14, 23)];
    let (repo, _) = generate(&spec).unwrap();
    let test = TestId::new(DEFAULT_TEST);
    let mut eval = repo.evaluator(30, &test, MigrationSettings::default());
    let head = repo.history.get(0).unwrap().clone();
    let tail = repo.history.get(29).unwrap().clone();
    let (found, _trace) = search_regression_inducing(
        &head,
        &tail,
        &test,
        &repo.history,
        &mut eval,
        SearchBudget::default(),
    )
    .unwrap();
    let ric = found.expect("flip is outside the region");
    assert_eq!(ric.index, 26);
    let fb = eval
        .evaluate(&repo.history.get(26).unwrap().clone(), &test)
        .unwrap();
    assert!(fb.is_fail());
    let prev = eval
        .evaluate(&repo.history.get(25).unwrap().clone(), &test)
        .unwrap();
    assert!(prev.is_pass());
}

#[test]
fn region_hiding_the_flip_forces_abandonment() {
    // the flip at 20 is inside [14, 23]: Pass@ric-1 can never be verified,
    // so the search must give up rather than guess
    let mut spec = spec_with_plant(36, 7, 0, 20, 30);
    spec.nf_regions = vec![(14, 23)];
    let (repo, _) = generate(&spec).unwrap();
    let test = TestId::new(DEFAULT_TEST);
    let mut eval = repo.evaluator(30, &test, MigrationSettings::default());
    let head = repo.history.get(0).unwrap().clone();
    let tail = repo.history.get(29).unwrap().clone();
    let (found, trace) = search_regression_inducing(
        &head,
        &tail,
        &test,
        &repo.history,
        &mut eval,
        SearchBudget::default(),
    )
    .unwrap();
    assert!(found.is_none());
    match trace.outcome {
        Outcome::Abandoned(AbandonReason::NoFeedbackBoundary { stuck_at, head, tail }) => {
            assert!((14..=23).contains(&stuck_at));
            // the bracket tightened onto the region edges before aborting
            assert!(head >= 13 && tail <= 24);
        }
        other => panic!("expected a no-feedback abandonment, got {other:?}"),
    }
}

#[test]
fn abandons_when_region_reaches_boundary() {
    // NF region runs right up to the tail boundary rfc-1
    let mut spec = spec_with_plant(30, 13, 0, 18, 26);
    spec.nf_regions = vec![(15, 25)];
    let (repo, _) = generate(&spec).unwrap();
    let test = TestId::new(DEFAULT_TEST);
    let mut eval = repo.evaluator(26, &test, MigrationSettings::default());
    let head = repo.history.get(0).unwrap().clone();
    let tail = repo.history.get(25).unwrap().clone();
    let err = search_regression_inducing(
        &head,
        &tail,
        &test,
        &repo.history,
        &mut eval,
        SearchBudget::default(),
    );
    // tail itself has no feedback: that is a precondition violation, the
    // pipeline never starts such a search
    assert!(err.is_err());

    // shift the bracket to the last failing revision before the region:
    // now the region interior makes re-bracketing impossible
    let mut spec = spec_with_plant(30, 13, 0, 10, 26);
    spec.nf_regions = vec![(11, 25)];
    let (repo, _) = generate(&spec).unwrap();
    let mut eval = repo.evaluator(26, &test, MigrationSettings::default());
    let head = repo.history.get(0).unwrap().clone();
    let tail = repo.history.get(10).unwrap().clone();
    let (found, trace) = search_regression_inducing(
        &head,
        &tail,
        &test,
        &repo.history,
        &mut eval,
        SearchBudget::default(),
    )
    .unwrap();
    assert_eq!(found.map(|c| c.index), Some(10), "flip right at the bracket");
    assert!(matches!(trace.outcome, Outcome::FoundRic(_)));
}

#[test]
fn closest_feedback_matches_exhaustive_scan() {
    let mut rng = SplitMix64::new(77);
    for round in 0..30 {
        let length = 24 + rng.below(60);
        let rfc = length - 2;
        let ric = 3 + rng.below(rfc - 6);
        let mut spec = spec_with_plant(length, 9000 + round, 0, ric, rfc);
        // one NF region strictly inside (0, rfc-1)
        let lo = 1 + rng.below(rfc - 4);
        let hi = (lo + 1 + rng.below(6)).min(length - 2);
        spec.nf_regions = vec![(lo, hi)];
        let (repo, _) = generate(&spec).unwrap();
        let test = TestId::new(DEFAULT_TEST);

        let mut oracle_eval = repo.evaluator(rfc, &test, MigrationSettings::default());
        let scan = linear_scan_oracle(&repo.history, &test, &mut oracle_eval).unwrap();

        // query from inside the region toward both ends
        let v_idx = lo + (hi - lo) / 2;
        for b_idx in [0usize, rfc - 1] {
            if b_idx == v_idx {
                continue;
            }
            let v = repo.history.get(v_idx).unwrap().clone();
            let b = repo.history.get(b_idx).unwrap().clone();
            let mut eval = repo.evaluator(rfc, &test, MigrationSettings::default());
            let (got, _probes) = search_feedback_revision(
                &v,
                &test,
                &b,
                &repo.history,
                &mut eval,
                SearchBudget::default(),
            )
            .unwrap();
            let want = scan.closest_feedback(v_idx, b_idx);
            assert_eq!(
                got.index, want,
                "round {round}: v={v_idx} b={b_idx} lo={lo} hi={hi}"
            );
        }
    }
}

#[test]
fn budget_exhaustion_returns_null() {
    let spec = spec_with_plant(64, 5, 0, 30, 60);
    let (repo, _) = generate(&spec).unwrap();
    let test = TestId::new(DEFAULT_TEST);
    let mut eval = repo.evaluator(60, &test, MigrationSettings::default());
    let head = repo.history.get(0).unwrap().clone();
    let tail = repo.history.get(59).unwrap().clone();
    let (found, trace) = search_regression_inducing(
        &head,
        &tail,
        &test,
        &repo.history,
        &mut eval,
        SearchBudget {
            max_evaluations: 3,
            max_span: 1024,
        },
    )
    .unwrap();
    assert!(found.is_none());
    assert!(matches!(
        trace.outcome,
        Outcome::Abandoned(AbandonReason::BudgetExhausted)
    ));
}
