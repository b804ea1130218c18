//! The adapter path against a real git repository: first-parent
//! linearization, worktree checkouts, and the external RESULT-protocol
//! runner (the crate's own `eval-tree` subcommand).

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;

use regress_miner::cache::{CachedTreeRunner, SharedFeedbackCache};
use regress_miner::config::MinerConfig;
use regress_miner::gitrepo::{linearize, GitStore};
use regress_miner::pipeline::RepoPipeline;
use regress_miner::runner::CommandRunner;

fn git(repo: &Path, args: &[&str]) {
    let out = Command::new("git")
        .arg("-C")
        .arg(repo)
        .args(args)
        .env("GIT_AUTHOR_NAME", "t")
        .env("GIT_AUTHOR_EMAIL", "t@example.com")
        .env("GIT_COMMITTER_NAME", "t")
        .env("GIT_COMMITTER_EMAIL", "t@example.com")
        .output()
        .expect("git runs");
    assert!(
        out.status.success(),
        "git {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write(repo: &Path, rel: &str, content: &str) {
    let path = repo.join(rel);
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(path, content).unwrap();
}

fn commit_all(repo: &Path, message: &str) {
    git(repo, &["add", "-A"]);
    git(repo, &["commit", "-q", "-m", message]);
}

fn feature(body_lines: &[&str]) -> String {
    let mut s = String::from("class Feature {\n  method compute() -> int {\n");
    // realistic body mass: single-line edits barely move body similarity
    for i in 0..30 {
        s.push_str(&format!("    line compute stage {i}\n"));
    }
    for l in body_lines {
        s.push_str(&format!("    {l}\n"));
    }
    s.push_str("  }\n}\n");
    s
}

const TEST_FILE: &str = "class FeatureTest {\n  method testComputeOk() {\n    expect Feature.compute ok\n  }\n}\n";
const UTIL_TEST: &str = "class UtilTest {\n  method testUtilOk() {\n    expect Util.helper ok\n  }\n}\n";
const UTIL: &str = "class Util {\n  method helper() -> int {\n    line util\n  }\n}\n";

/// History: 0 ok, 1 churn, 2 bug introduced (on a side branch merged at 3),
/// 4 more churn, 5 fix + test added.
fn build_repo(root: &Path) -> PathBuf {
    let repo = root.join("proj");
    std::fs::create_dir_all(&repo).unwrap();
    git(&repo, &["init", "-q", "-b", "main"]);
    write(&repo, "src/main/Feature.dsl", &feature(&["line base work", "line step two"]));
    write(&repo, "src/main/Util.dsl", UTIL);
    write(&repo, "src/test/UtilTest.dsl", UTIL_TEST);
    commit_all(&repo, "initial layout");

    write(
        &repo,
        "src/main/Feature.dsl",
        &feature(&["line base work", "line step two", "line tuned"]),
    );
    commit_all(&repo, "tune the feature");

    // inducing change on a branch, merged back (first-parent collapses it)
    git(&repo, &["checkout", "-q", "-b", "topic"]);
    write(
        &repo,
        "src/main/Feature.dsl",
        &feature(&["line base work", "line step two", "line tuned", "fail overflow in compute"]),
    );
    commit_all(&repo, "rework compute path");
    git(&repo, &["checkout", "-q", "main"]);
    git(&repo, &["merge", "-q", "--no-ff", "-m", "merge topic", "topic"]);

    write(&repo, "src/main/Util.dsl", "class Util {\n  method helper() -> int {\n    line util\n    line more\n  }\n}\n");
    commit_all(&repo, "util churn");

    write(
        &repo,
        "src/main/Feature.dsl",
        &feature(&["line base work", "line step two", "line tuned", "line guarded"]),
    );
    write(&repo, "src/test/FeatureTest.dsl", TEST_FILE);
    commit_all(&repo, "fix overflow regression with test");
    repo
}

#[test]
fn linearize_follows_first_parent_and_collapses_merges() {
    let dir = tempfile::tempdir().unwrap();
    let repo = build_repo(dir.path());
    let history = linearize(&repo, "main").unwrap();
    // initial, tune, merge (collapsed), util churn, fix
    assert_eq!(history.len(), 5);
    let expected = Command::new("git")
        .arg("-C")
        .arg(&repo)
        .args(["log", "--first-parent", "--reverse", "--format=%H", "main"])
        .output()
        .unwrap();
    let expected: Vec<String> = String::from_utf8_lossy(&expected.stdout)
        .lines()
        .map(|s| s.to_string())
        .collect();
    let got: Vec<String> = history.commits.iter().map(|c| c.id.clone()).collect();
    assert_eq!(got, expected);
    // the merge commit's first-parent diff carries the inducing change
    let merge_diff = history.diff(2);
    assert!(merge_diff
        .iter()
        .flat_map(|f| &f.hunks)
        .flat_map(|h| &h.add)
        .any(|l| l.content.contains("fail overflow")));
}

#[test]
fn empty_repository_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let repo = dir.path().join("empty");
    std::fs::create_dir_all(&repo).unwrap();
    git(&repo, &["init", "-q", "-b", "main"]);
    assert!(linearize(&repo, "main").is_err());
    assert!(linearize(&dir.path().join("nowhere"), "main").is_err());
}

#[test]
fn mines_the_planted_regression_through_the_external_runner() {
    let dir = tempfile::tempdir().unwrap();
    let repo = build_repo(dir.path());
    let history = linearize(&repo, "main").unwrap();
    let scratch = dir.path().join("scratch");
    std::fs::create_dir_all(&scratch).unwrap();
    let store = GitStore::new(repo.clone(), history.clone(), scratch.clone());

    // the miner's own binary is the reference RESULT-protocol runner
    let config = MinerConfig::load(
        None,
        &[
            // the tiny history has little churn; rank everything
            "potential.th_rp=0.0".into(),
            "runner.timeout_secs=60".into(),
        ],
    )
    .unwrap();
    let cache = SharedFeedbackCache::in_memory();
    let runner = CachedTreeRunner::new(
        CommandRunner::new(
            vec![env!("CARGO_BIN_EXE_regress-miner").to_string(), "eval-tree".to_string()],
            std::time::Duration::from_secs(60),
            0,
            scratch.clone(),
        ),
        Arc::clone(&cache),
    );
    let mut pipeline = RepoPipeline::new(
        "gitproj",
        store,
        runner,
        history.clone(),
        config,
        Arc::clone(&cache),
    );
    let outcome = pipeline.mine().unwrap();
    assert_eq!(outcome.records.len(), 1, "reports: {:?}", outcome.reports);
    let record = &outcome.records[0];
    assert_eq!(record.rfc.index, 4, "fix lands in the last commit");
    assert_eq!(record.ric.index, 2, "merge commit carries the inducing change");
    assert_eq!(record.wc.index, 1);
}
