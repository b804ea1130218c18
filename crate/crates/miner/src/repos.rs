//! Opening repositories (real or simulated) and running the pipeline across
//! a batch of them.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use regress_core::history::CommitHistory;
use regress_core::semantics::SemanticLabels;
use regress_core::sim::{generate, parse_spec, GroundTruth, SimRepo, SimRunner};

use crate::cache::{CachedTreeRunner, SharedFeedbackCache};
use crate::config::MinerConfig;
use crate::gitrepo::{commit_message, linearize, GitStore};
use crate::labels::label_history;
use crate::pipeline::{MineOutcome, RepoPipeline};
use crate::runner::CommandRunner;

/// A repository the miner can work on: a path to a git checkout, or a
/// history-spec file describing a synthetic repository.
#[allow(clippy::large_enum_variant)]
pub enum OpenRepo {
    Sim {
        name: String,
        repo: Box<SimRepo>,
        truth: Box<GroundTruth>,
    },
    Git {
        name: String,
        path: PathBuf,
        store: GitStore,
        history: CommitHistory,
    },
}

impl OpenRepo {
    pub fn name(&self) -> &str {
        match self {
            OpenRepo::Sim { name, .. } => name,
            OpenRepo::Git { name, .. } => name,
        }
    }

    pub fn history(&self) -> &CommitHistory {
        match self {
            OpenRepo::Sim { repo, .. } => &repo.history,
            OpenRepo::Git { history, .. } => history,
        }
    }
}

pub fn open_repo(path: &Path, config: &MinerConfig) -> Result<OpenRepo> {
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    if path.is_file() {
        let raw = std::fs::read_to_string(path)
            .with_context(|| format!("reading history spec {path:?}"))?;
        let spec = parse_spec(&raw).map_err(|e| anyhow::anyhow!("{e}"))?;
        let (repo, truth) = generate(&spec).map_err(|e| anyhow::anyhow!("{e}"))?;
        return Ok(OpenRepo::Sim {
            name,
            repo: Box::new(repo),
            truth: Box::new(truth),
        });
    }
    if path.is_dir() {
        let history = linearize(path, &config.branch)?;
        let scratch = std::env::temp_dir().join(format!(
            "regress-miner-{}-{}",
            name,
            std::process::id()
        ));
        std::fs::create_dir_all(&scratch)?;
        let store = GitStore::new(path.to_path_buf(), history.clone(), scratch);
        return Ok(OpenRepo::Git {
            name,
            path: path.to_path_buf(),
            store,
            history,
        });
    }
    bail!("{path:?} is neither a repository directory nor a history spec file")
}

/// Builds and runs one repository's pipeline.
pub fn mine_one(
    repo: &OpenRepo,
    config: &MinerConfig,
    cache: &Arc<SharedFeedbackCache>,
) -> Result<MineOutcome> {
    match repo {
        OpenRepo::Sim { name, repo, .. } => {
            let runner = CachedTreeRunner::new(SimRunner, Arc::clone(cache));
            let mut pipeline = RepoPipeline::new(
                name.clone(),
                repo.as_ref().clone(),
                runner,
                repo.history.clone(),
                config.clone(),
                Arc::clone(cache),
            );
            pipeline.mine()
        }
        OpenRepo::Git {
            name,
            store,
            history,
            ..
        } => {
            if config.runner.command.is_empty() {
                bail!("mining a git repository needs runner.command in the config");
            }
            let scratch = std::env::temp_dir().join(format!(
                "regress-miner-run-{}-{}",
                name,
                std::process::id()
            ));
            std::fs::create_dir_all(&scratch)?;
            let runner = CachedTreeRunner::new(
                CommandRunner::new(
                    config.runner.command.clone(),
                    Duration::from_secs(config.runner.timeout_secs),
                    config.runner.retries,
                    scratch,
                ),
                Arc::clone(cache),
            );
            let mut pipeline = RepoPipeline::new(
                name.clone(),
                store.clone(),
                runner,
                history.clone(),
                config.clone(),
                Arc::clone(cache),
            );
            pipeline.mine()
        }
    }
}

/// Mines a batch of repositories in parallel. Per-repo failures are
/// isolated: the batch never aborts because one repository is unreadable.
pub fn mine_all(
    paths: &[PathBuf],
    config: &MinerConfig,
    cache: &Arc<SharedFeedbackCache>,
) -> (Vec<MineOutcome>, Vec<(String, String)>) {
    let results: Vec<(String, Result<MineOutcome>)> = paths
        .par_iter()
        .map(|path| {
            let name = path.display().to_string();
            let outcome = open_repo(path, config).and_then(|r| mine_one(&r, config, cache));
            (name, outcome)
        })
        .collect();
    let mut outcomes = Vec::new();
    let mut errors = Vec::new();
    for (name, result) in results {
        match result {
            Ok(o) => outcomes.push(o),
            Err(e) => errors.push((name, format!("{e:#}"))),
        }
    }
    (outcomes, errors)
}

/// Semantic labels of every mined record's inducing commit, for the summary
/// report (keyed by commit id).
pub fn label_record_inducers(
    repos: &BTreeMap<String, OpenRepo>,
    outcomes: &[MineOutcome],
    config: &MinerConfig,
) -> BTreeMap<String, SemanticLabels> {
    let th = config.label_thresholds();
    let mut out = BTreeMap::new();
    for outcome in outcomes {
        let Some(repo) = repos.get(&outcome.repo) else {
            continue;
        };
        for record in &outcome.records {
            let labels = match repo {
                OpenRepo::Sim { repo, .. } => {
                    let mut store = repo.as_ref().clone();
                    let hunks = crate::labels::attributed_hunks_of(
                        &repo.history,
                        &mut store,
                        record.ric.index,
                    );
                    regress_core::semantics::label_commit(&hunks, "", &th)
                }
                OpenRepo::Git {
                    path,
                    store,
                    history,
                    ..
                } => {
                    let mut store = store.clone();
                    let hunks =
                        crate::labels::attributed_hunks_of(history, &mut store, record.ric.index);
                    let message = commit_message(path, &record.ric.id).unwrap_or_default();
                    regress_core::semantics::label_commit(&hunks, &message, &th)
                }
            };
            out.insert(record.ric.id.clone(), labels);
        }
    }
    out
}

/// Per-commit labels of one repository (the `label` subcommand).
pub fn label_repo(repo: &OpenRepo, config: &MinerConfig) -> Vec<(regress_core::CommitId, SemanticLabels)> {
    let th = config.label_thresholds();
    match repo {
        OpenRepo::Sim { repo, .. } => {
            let mut store = repo.as_ref().clone();
            let history = repo.history.clone();
            label_history(&history, &mut store, &th, |_| String::new())
        }
        OpenRepo::Git {
            path,
            store,
            history,
            ..
        } => {
            let mut store = store.clone();
            let path = path.clone();
            label_history(history, &mut store, &th, |c| {
                commit_message(&path, &c.id).unwrap_or_default()
            })
        }
    }
}
