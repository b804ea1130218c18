//! Adapter over the system `git` binary: first-parent linearization,
//! zero-context diffs, and revision checkout into in-memory trees.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use regress_core::diff::{DiffLine, FileDiff, Hunk};
use regress_core::evaluator::RevisionStore;
use regress_core::history::{CommitHistory, CommitId, EvalError};
use regress_core::migrate::EnvironmentMetadata;
use regress_core::tree::SourceTree;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GitError {
    #[error("repository unavailable at {0}: {1}")]
    RepositoryUnavailable(PathBuf, String),
    #[error("branch `{0}` has no commits")]
    EmptyBranch(String),
    #[error("git {0} failed: {1}")]
    Command(String, String),
}

fn git(repo: &Path, args: &[&str]) -> Result<String, GitError> {
    let out = Command::new("git")
        .arg("-C")
        .arg(repo)
        .args(args)
        .output()
        .map_err(|e| GitError::RepositoryUnavailable(repo.to_path_buf(), e.to_string()))?;
    if !out.status.success() {
        return Err(GitError::Command(
            args.join(" "),
            String::from_utf8_lossy(&out.stderr).trim().to_string(),
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

/// First-parent linearization of a branch, oldest first, with zero-context
/// diffs per commit. Merge commits contribute a single combined diff against
/// their first parent.
pub fn linearize(repo: &Path, branch: &str) -> Result<CommitHistory, GitError> {
    if !repo.join(".git").exists() && git(repo, &["rev-parse", "--git-dir"]).is_err() {
        return Err(GitError::RepositoryUnavailable(
            repo.to_path_buf(),
            "not a git repository".into(),
        ));
    }
    git(repo, &["rev-parse", "--verify", branch])
        .map_err(|_| GitError::EmptyBranch(branch.to_string()))?;
    let log = git(repo, &["log", "--first-parent", "--reverse", "--format=%H", branch])?;
    let ids: Vec<&str> = log.lines().filter(|l| !l.trim().is_empty()).collect();
    if ids.is_empty() {
        return Err(GitError::EmptyBranch(branch.to_string()));
    }

    let mut history = CommitHistory {
        branch: branch.to_string(),
        commits: Vec::with_capacity(ids.len()),
        diffs: Default::default(),
    };
    for (index, id) in ids.iter().enumerate() {
        history.commits.push(CommitId::new(id.to_string(), index));
        let raw = if index == 0 {
            git(
                repo,
                &["diff-tree", "--root", "-r", "-U0", "--no-commit-id", id],
            )?
        } else {
            git(repo, &["diff", "-U0", ids[index - 1], id])?
        };
        history.diffs.insert(index, parse_unified_diff(&raw));
    }
    Ok(history)
}

/// Commit message, for semantic labeling.
pub fn commit_message(repo: &Path, id: &str) -> Result<String, GitError> {
    git(repo, &["log", "-1", "--format=%B", id]).map(|s| s.trim().to_string())
}

/// Parses `git diff -U0` output into per-file hunks with 1-based positions.
pub fn parse_unified_diff(raw: &str) -> Vec<FileDiff> {
    let mut out: Vec<FileDiff> = Vec::new();
    let mut file: Option<FileDiff> = None;
    let mut hunk: Option<Hunk> = None;
    let mut old_pos = 0u32;
    let mut new_pos = 0u32;

    let flush_hunk = |file: &mut Option<FileDiff>, hunk: &mut Option<Hunk>| {
        if let (Some(f), Some(h)) = (file.as_mut(), hunk.take()) {
            if !h.is_empty() {
                f.hunks.push(h);
            }
        }
    };

    for line in raw.lines() {
        if let Some(rest) = line.strip_prefix("diff --git ") {
            flush_hunk(&mut file, &mut hunk);
            if let Some(f) = file.take() {
                out.push(f);
            }
            // `a/path b/path`; quoting is not handled, exotic names are rare
            let path = rest
                .split(" b/")
                .nth(1)
                .unwrap_or(rest)
                .trim()
                .to_string();
            file = Some(FileDiff {
                file: path,
                hunks: Vec::new(),
                old_existed: true,
                new_existed: true,
            });
        } else if let Some(f) = file.as_mut() {
            if line.starts_with("--- ") {
                f.old_existed = !line.ends_with("/dev/null");
            } else if line.starts_with("+++ ") {
                f.new_existed = !line.ends_with("/dev/null");
                if f.new_existed {
                    if let Some(p) = line.strip_prefix("+++ b/") {
                        f.file = p.trim().to_string();
                    }
                }
            } else if let Some(header) = line.strip_prefix("@@ ") {
                flush_hunk(&mut file, &mut hunk);
                let mut parts = header.split(' ');
                let old = parts.next().unwrap_or("-0,0");
                let new = parts.next().unwrap_or("+0,0");
                let parse_side = |s: &str| -> (u32, u32) {
                    let s = s.trim_start_matches(['-', '+']);
                    match s.split_once(',') {
                        Some((a, b)) => (a.parse().unwrap_or(0), b.parse().unwrap_or(0)),
                        None => (s.parse().unwrap_or(0), 1),
                    }
                };
                let (os, oc) = parse_side(old);
                let (ns, nc) = parse_side(new);
                // with a count of 0 the start is the line before the change
                old_pos = if oc == 0 { os + 1 } else { os };
                new_pos = if nc == 0 { ns + 1 } else { ns };
                hunk = Some(Hunk {
                    file: file.as_ref().map(|f| f.file.clone()).unwrap_or_default(),
                    ..Hunk::default()
                });
            } else if let Some(h) = hunk.as_mut() {
                if let Some(content) = line.strip_prefix('+') {
                    h.add.push(DiffLine {
                        line: new_pos,
                        content: content.to_string(),
                    });
                    new_pos += 1;
                } else if let Some(content) = line.strip_prefix('-') {
                    h.del.push(DiffLine {
                        line: old_pos,
                        content: content.to_string(),
                    });
                    old_pos += 1;
                } else if line.starts_with(' ') {
                    old_pos += 1;
                    new_pos += 1;
                }
            }
        }
    }
    flush_hunk(&mut file, &mut hunk);
    if let Some(f) = file.take() {
        out.push(f);
    }
    out
}

const MAX_FILE_BYTES: u64 = 512 * 1024;

fn read_tree_from_dir(root: &Path) -> std::io::Result<SourceTree> {
    let mut tree = SourceTree::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir)? {
            let entry = entry?;
            let path = entry.path();
            let name = entry.file_name();
            if name == ".git" {
                continue;
            }
            let meta = entry.metadata()?;
            if meta.is_dir() {
                stack.push(path);
            } else if meta.len() <= MAX_FILE_BYTES {
                if let Ok(content) = std::fs::read_to_string(&path) {
                    let rel = path
                        .strip_prefix(root)
                        .expect("path under root")
                        .to_string_lossy()
                        .replace('\\', "/");
                    tree.insert(rel, content);
                }
            }
        }
    }
    Ok(tree)
}

/// Revision source over a real repository: revisions are checked out into
/// throwaway worktrees and read into memory once, then cached.
#[derive(Clone)]
pub struct GitStore {
    repo: PathBuf,
    history: CommitHistory,
    scratch: PathBuf,
    trees: Arc<Mutex<HashMap<usize, Arc<SourceTree>>>>,
    sequence: Arc<AtomicU64>,
}

impl GitStore {
    pub fn new(repo: PathBuf, history: CommitHistory, scratch: PathBuf) -> Self {
        Self {
            repo,
            history,
            scratch,
            trees: Arc::new(Mutex::new(HashMap::new())),
            sequence: Arc::new(AtomicU64::new(0)),
        }
    }

    pub fn history(&self) -> &CommitHistory {
        &self.history
    }

    fn checkout(&self, id: &str) -> Result<SourceTree, GitError> {
        let n = self.sequence.fetch_add(1, Ordering::Relaxed);
        let dir = self.scratch.join(format!("wt-{n:06}"));
        git(
            &self.repo,
            &[
                "worktree",
                "add",
                "--detach",
                dir.to_str().unwrap_or("scratch"),
                id,
            ],
        )?;
        let tree = read_tree_from_dir(&dir)
            .map_err(|e| GitError::Command("read worktree".into(), e.to_string()));
        let _ = git(
            &self.repo,
            &[
                "worktree",
                "remove",
                "--force",
                dir.to_str().unwrap_or("scratch"),
            ],
        );
        let _ = std::fs::remove_dir_all(&dir);
        tree
    }
}

/// Environment metadata read from an optional `.env-metadata` file at the
/// tree root: `language_level <v>` plus `lib <name> <version>` lines.
pub fn env_from_tree(tree: &SourceTree) -> EnvironmentMetadata {
    let mut env = EnvironmentMetadata::with_language_level("1.7");
    if let Some(content) = tree.get(".env-metadata") {
        for line in content.lines() {
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some("language_level") => {
                    if let Some(v) = parts.next() {
                        env.language_level = v.to_string();
                    }
                }
                Some("lib") => {
                    if let (Some(name), Some(version)) = (parts.next(), parts.next()) {
                        env.library_versions.insert(name.into(), version.into());
                    }
                }
                _ => {}
            }
        }
    }
    env
}

impl RevisionStore for GitStore {
    fn len(&self) -> usize {
        self.history.len()
    }

    fn commit(&self, index: usize) -> &CommitId {
        &self.history.commits[index]
    }

    fn tree(&mut self, index: usize) -> Result<Arc<SourceTree>, EvalError> {
        if let Some(t) = self.trees.lock().expect("tree cache").get(&index) {
            return Ok(t.clone());
        }
        let id = self.history.commits[index].id.clone();
        let tree = self
            .checkout(&id)
            .map_err(|e| EvalError::RunnerCrash(format!("checkout {id}: {e}")))?;
        let arc = Arc::new(tree);
        self.trees
            .lock()
            .expect("tree cache")
            .insert(index, arc.clone());
        Ok(arc)
    }

    fn env(&mut self, index: usize) -> EnvironmentMetadata {
        self.tree(index)
            .map(|t| env_from_tree(&t))
            .unwrap_or_else(|_| EnvironmentMetadata::with_language_level("1.7"))
    }
}
