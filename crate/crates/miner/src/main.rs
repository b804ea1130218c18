//! Command-line interface of the regression miner.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use regress_core::history::{Evaluate, TestId};
use regress_core::sim::{generate, linear_scan_oracle, parse_spec, render_spec};

use regress_miner::cache::SharedFeedbackCache;
use regress_miner::config::MinerConfig;
use regress_miner::export;
use regress_miner::pipeline::ScoredCandidate;
use regress_miner::repos::{self, OpenRepo};

#[derive(Parser)]
#[command(
    name = "regress-miner",
    about = "Mine regression triples (fixing commit, inducing commit, test) from version histories",
    version
)]
struct Cli {
    /// Configuration file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config value, e.g. --set potential.p=0.1 (repeatable).
    #[arg(long = "set", global = true)]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline over one or more repositories and export a
    /// dataset.
    Mine {
        /// Git checkouts or history-spec files.
        repos: Vec<PathBuf>,
    },
    /// Score and rank a repository's bug-fixing commits by regression
    /// potential (CSV on stdout).
    Rank { repo: PathBuf },
    /// Search one fixing commit for its regression-inducing commit.
    Search {
        repo: PathBuf,
        /// Commit id (prefix) of the fixing commit.
        #[arg(long)]
        rfc: String,
        /// Qualified name of the regression test.
        #[arg(long)]
        test: String,
    },
    /// Label every commit of a repository (CSV on stdout).
    Label { repo: PathBuf },
    /// Summarize an exported dataset.
    Analyze { dataset: PathBuf },
    /// Generate a synthetic repository from a history spec.
    Simulate {
        spec: PathBuf,
        /// Directory for ground truth and generated artifacts.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reference build runner: evaluate the DSL tree in the current
    /// directory and write a RESULT file (PASS / FAIL <file>:<line> <msg> /
    /// NOFEEDBACK <reason>). Reads TEST_ID and LANG_LEVEL from the
    /// environment.
    EvalTree {
        #[arg(long)]
        test: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match MinerConfig::load(cli.config.as_deref(), &cli.overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    match run(cli.command, config) {
        Ok(partial_failure) => {
            if partial_failure {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn open_cache(config: &MinerConfig) -> Result<Arc<SharedFeedbackCache>> {
    match &config.cache_file {
        Some(path) => SharedFeedbackCache::with_file(path).context("opening feedback cache"),
        None => Ok(SharedFeedbackCache::in_memory()),
    }
}

/// Returns whether the run had partial failures (exit code 2).
fn run(command: Command, config: MinerConfig) -> Result<bool> {
    match command {
        Command::Mine { repos: paths } => {
            if paths.is_empty() {
                bail!("mine needs at least one repository");
            }
            let cache = open_cache(&config)?;
            let (outcomes, errors) = repos::mine_all(&paths, &config, &cache);
            cache.save().ok();

            let mut opened = BTreeMap::new();
            for path in &paths {
                if let Ok(r) = repos::open_repo(path, &config) {
                    opened.insert(r.name().to_string(), r);
                }
            }
            let labels = repos::label_record_inducers(&opened, &outcomes, &config);
            let dataset = export::export_dataset(&outcomes, &labels, &config.output_dir)?;

            let total_records: usize = outcomes.iter().map(|o| o.records.len()).sum();
            println!(
                "mined {total_records} regression(s) from {} repo(s) -> {}",
                outcomes.len(),
                dataset.display()
            );
            for o in &outcomes {
                for r in &o.records {
                    println!(
                        "  {}: rfc {} ric {} wc {} test {} coverage {}",
                        o.repo,
                        r.rfc.id,
                        r.ric.id,
                        r.wc.id,
                        r.test,
                        r.coverage_similarity
                            .map(|c| format!("{c:.3}"))
                            .unwrap_or_else(|| "n/a".into()),
                    );
                }
            }
            for (repo, error) in &errors {
                eprintln!("repo failed: {repo}: {error}");
            }
            Ok(!errors.is_empty())
        }
        Command::Rank { repo } => {
            let cache = open_cache(&config)?;
            let opened = repos::open_repo(&repo, &config)?;
            let scored = rank_repo(&opened, &config, &cache)?;
            print!("{}", export::scores_csv(&scored));
            Ok(false)
        }
        Command::Search { repo, rfc, test } => {
            let cache = open_cache(&config)?;
            let opened = repos::open_repo(&repo, &config)?;
            let history = opened.history().clone();
            let commit = history
                .commits
                .iter()
                .find(|c| c.id.starts_with(&rfc))
                .with_context(|| format!("no commit with id prefix `{rfc}`"))?
                .clone();
            if commit.index == 0 {
                bail!("the fixing commit has no predecessor");
            }
            let outcome = search_one(&opened, &config, &cache, &commit, &TestId::new(test))?;
            match &outcome {
                Some(record) => {
                    println!(
                        "ric {} (wc {}) for rfc {}; trace {}",
                        record.ric.id, record.wc.id, record.rfc.id, record.trace_ref
                    );
                }
                None => println!("no regression-inducing commit found"),
            }
            cache.save().ok();
            Ok(false)
        }
        Command::Label { repo } => {
            let opened = repos::open_repo(&repo, &config)?;
            let labels = repos::label_repo(&opened, &config);
            print!("{}", export::labels_csv(&labels));
            Ok(false)
        }
        Command::Analyze { dataset } => {
            let path = if dataset.is_dir() {
                dataset.join("regressions.jsonl")
            } else {
                dataset.clone()
            };
            let records = export::read_dataset(&path)?;
            let refs: Vec<&regress_miner::pipeline::RegressionRecord> = records.iter().collect();
            let histogram = export::coverage_histogram(&refs);
            let mut per_repo: BTreeMap<String, u64> = BTreeMap::new();
            for r in &records {
                *per_repo.entry(r.repo.clone()).or_default() += 1;
            }
            println!("records: {}", records.len());
            println!("repos: {}", per_repo.len());
            let scored: Vec<f64> = records.iter().filter_map(|r| r.coverage_similarity).collect();
            if !scored.is_empty() {
                let mean = scored.iter().sum::<f64>() / scored.len() as f64;
                println!("coverage similarity mean: {mean:.3}");
            }
            println!("coverage histogram (0.0..1.0 in tenths): {histogram:?}");
            match regress_miner::metrics::diversity_entropy(&per_repo) {
                Ok(h) => println!("repo-distribution entropy: {h:.4} bits"),
                Err(_) => println!("repo-distribution entropy: n/a"),
            }
            Ok(false)
        }
        Command::Simulate { spec, out } => {
            let raw = std::fs::read_to_string(&spec)
                .with_context(|| format!("reading history spec {spec:?}"))?;
            let parsed = parse_spec(&raw).map_err(|e| anyhow::anyhow!("{e}"))?;
            let (repo, truth) = generate(&parsed).map_err(|e| anyhow::anyhow!("{e}"))?;
            println!(
                "generated {} commits (seed {})",
                repo.history.len(),
                parsed.seed
            );
            if let Some(plant) = &truth.plant {
                // replay the planted test across the whole history
                let test = TestId::new(plant.test_name.clone());
                let mut eval = repo.evaluator(
                    plant.fixing_index,
                    &test,
                    config.migration_settings()?,
                );
                let scan = linear_scan_oracle(&repo.history, &test, &mut eval)
                    .map_err(|e| anyhow::anyhow!("{e}"))?;
                let pattern: String = scan
                    .feedbacks
                    .iter()
                    .map(|f| match f {
                        regress_core::Feedback::Pass => 'P',
                        regress_core::Feedback::Fail(_) => 'F',
                        regress_core::Feedback::NoFeedback(_) => 'N',
                    })
                    .collect();
                println!("planted test {} replay: {pattern}", plant.test_name);
                println!("fresh evaluations: {}", eval.fresh_evaluations());
            }
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join("spec.txt"), render_spec(&parsed))?;
                std::fs::write(
                    dir.join("ground_truth.json"),
                    serde_json::to_string_pretty(&truth)?,
                )?;
                println!("ground truth -> {}", dir.join("ground_truth.json").display());
            }
            Ok(false)
        }
        Command::EvalTree { test } => {
            use regress_core::evaluator::TreeRunner;
            let test = test
                .or_else(|| std::env::var("TEST_ID").ok())
                .context("eval-tree needs --test or TEST_ID")?;
            let cwd = std::env::current_dir()?;
            let mut tree = regress_core::SourceTree::new();
            read_dir_into_tree(&cwd, &cwd, &mut tree)?;
            let mut env = regress_miner::gitrepo::env_from_tree(&tree);
            if let Ok(level) = std::env::var("LANG_LEVEL") {
                if !level.is_empty() {
                    env.language_level = level;
                }
            }
            let fb = regress_core::sim::SimRunner
                .run(&tree, &env, &TestId::new(test))
                .map_err(|e| anyhow::anyhow!("{e}"))?;
            let line = match &fb {
                regress_core::Feedback::Pass => "PASS".to_string(),
                regress_core::Feedback::Fail(sig) => {
                    format!("FAIL {}:{} {}", sig.file, sig.line, sig.message)
                }
                regress_core::Feedback::NoFeedback(reason) => format!("NOFEEDBACK {reason:?}"),
            };
            std::fs::write(cwd.join("RESULT"), format!("{line}\n"))?;
            println!("{line}");
            Ok(false)
        }
    }
}

fn read_dir_into_tree(
    root: &std::path::Path,
    dir: &std::path::Path,
    tree: &mut regress_core::SourceTree,
) -> Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        let path = entry.path();
        if entry.file_name() == ".git" || entry.file_name() == "RESULT" {
            continue;
        }
        if path.is_dir() {
            read_dir_into_tree(root, &path, tree)?;
        } else if let Ok(content) = std::fs::read_to_string(&path) {
            let rel = path
                .strip_prefix(root)
                .unwrap_or(&path)
                .to_string_lossy()
                .replace('\\', "/");
            tree.insert(rel, content);
        }
    }
    Ok(())
}

fn rank_repo(
    repo: &OpenRepo,
    config: &MinerConfig,
    cache: &Arc<SharedFeedbackCache>,
) -> Result<Vec<ScoredCandidate>> {
    use regress_miner::cache::CachedTreeRunner;
    use regress_miner::pipeline::RepoPipeline;
    match repo {
        OpenRepo::Sim { name, repo, .. } => {
            let runner = CachedTreeRunner::new(regress_core::sim::SimRunner, Arc::clone(cache));
            let mut p = RepoPipeline::new(
                name.clone(),
                repo.as_ref().clone(),
                runner,
                repo.history.clone(),
                config.clone(),
                Arc::clone(cache),
            );
            let (mut scored, _reports, _fresh) = p.score_candidates()?;
            scored.sort_by(|a, b| {
                b.score
                    .partial_cmp(&a.score)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then_with(|| a.commit.index.cmp(&b.commit.index))
            });
            Ok(scored)
        }
        OpenRepo::Git {
            name,
            store,
            history,
            ..
        } => {
            if config.runner.command.is_empty() {
                bail!("ranking a git repository needs runner.command in the config");
            }
            let scratch = std::env::temp_dir().join(format!("regress-rank-{}", std::process::id()));
            std::fs::create_dir_all(&scratch)?;
            let runner = CachedTreeRunner::new(
                regress_miner::runner::CommandRunner::new(
                    config.runner.command.clone(),
                    std::time::Duration::from_secs(config.runner.timeout_secs),
                    config.runner.retries,
                    scratch,
                ),
                Arc::clone(cache),
            );
            let mut p = RepoPipeline::new(
                name.clone(),
                store.clone(),
                runner,
                history.clone(),
                config.clone(),
                Arc::clone(cache),
            );
            let (mut scored, _reports, _fresh) = p.score_candidates()?;
            scored.sort_by(|a, b| {
                b.score
                    .partial_cmp(&a.score)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then_with(|| a.commit.index.cmp(&b.commit.index))
            });
            Ok(scored)
        }
    }
}

fn search_one(
    repo: &OpenRepo,
    config: &MinerConfig,
    cache: &Arc<SharedFeedbackCache>,
    rfc: &regress_core::CommitId,
    test: &TestId,
) -> Result<Option<regress_miner::pipeline::RegressionRecord>> {
    use regress_miner::cache::CachedTreeRunner;
    use regress_miner::pipeline::RepoPipeline;
    let (report, record, trace) = match repo {
        OpenRepo::Sim { name, repo, .. } => {
            let runner = CachedTreeRunner::new(regress_core::sim::SimRunner, Arc::clone(cache));
            let mut p = RepoPipeline::new(
                name.clone(),
                repo.as_ref().clone(),
                runner,
                repo.history.clone(),
                config.clone(),
                Arc::clone(cache),
            );
            p.search_single(rfc, test)?
        }
        OpenRepo::Git {
            name,
            store,
            history,
            ..
        } => {
            if config.runner.command.is_empty() {
                bail!("searching a git repository needs runner.command in the config");
            }
            let scratch =
                std::env::temp_dir().join(format!("regress-search-{}", std::process::id()));
            std::fs::create_dir_all(&scratch)?;
            let runner = CachedTreeRunner::new(
                regress_miner::runner::CommandRunner::new(
                    config.runner.command.clone(),
                    std::time::Duration::from_secs(config.runner.timeout_secs),
                    config.runner.retries,
                    scratch,
                ),
                Arc::clone(cache),
            );
            let mut p = RepoPipeline::new(
                name.clone(),
                store.clone(),
                runner,
                history.clone(),
                config.clone(),
                Arc::clone(cache),
            );
            p.search_single(rfc, test)?
        }
    };
    if record.is_none() {
        eprintln!("candidate outcome: {:?}", report.outcome);
    }
    if let Some((name, t)) = trace {
        let dir = config.output_dir.join("traces");
        std::fs::create_dir_all(&dir)?;
        let mut body = String::new();
        for p in &t.visited {
            body.push_str(&serde_json::to_string(&p)?);
            body.push('\n');
        }
        std::fs::write(dir.join(format!("{name}.jsonl")), body)?;
    }
    Ok(record)
}
