//! Persistent, thread-shared feedback cache.
//!
//! Keys are `(commit id, test id, migration fingerprint)`. Reads take a
//! shared lock, writes an exclusive one; entries survive runs through a
//! JSON-lines file, which is what makes re-mining an unchanged repository
//! cost zero runner invocations.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use regress_core::history::{CommitId, EvalError, Evaluate, Feedback, TestId};
use serde::{Deserialize, Serialize};

#[derive(Debug, Serialize, Deserialize)]
struct Entry {
    commit: String,
    test: String,
    fingerprint: u64,
    feedback: Feedback,
}

#[derive(Debug, Default)]
pub struct SharedFeedbackCache {
    map: RwLock<HashMap<(String, String, u64), Feedback>>,
    hits: AtomicU64,
    path: Option<PathBuf>,
}

impl SharedFeedbackCache {
    pub fn in_memory() -> Arc<Self> {
        Arc::new(Self::default())
    }

    /// Loads any existing entries from `path`; `save` writes back there.
    pub fn with_file(path: &Path) -> std::io::Result<Arc<Self>> {
        let mut map = HashMap::new();
        if path.exists() {
            let file = std::fs::File::open(path)?;
            for line in BufReader::new(file).lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let e: Entry = serde_json::from_str(&line)
                    .map_err(|err| std::io::Error::new(std::io::ErrorKind::InvalidData, err))?;
                map.insert((e.commit, e.test, e.fingerprint), e.feedback);
            }
        }
        Ok(Arc::new(Self {
            map: RwLock::new(map),
            hits: AtomicU64::new(0),
            path: Some(path.to_path_buf()),
        }))
    }

    pub fn get(&self, commit: &str, test: &TestId, fingerprint: u64) -> Option<Feedback> {
        let got = self
            .map
            .read()
            .expect("cache lock")
            .get(&(commit.to_string(), test.as_str().to_string(), fingerprint))
            .cloned();
        if got.is_some() {
            self.hits.fetch_add(1, Ordering::Relaxed);
        }
        got
    }

    pub fn insert(&self, commit: &str, test: &TestId, fingerprint: u64, fb: Feedback) {
        self.map.write().expect("cache lock").insert(
            (commit.to_string(), test.as_str().to_string(), fingerprint),
            fb,
        );
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Writes all entries back to the backing file (no-op when in-memory).
    pub fn save(&self) -> std::io::Result<()> {
        let Some(path) = &self.path else {
            return Ok(());
        };
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let map = self.map.read().expect("cache lock");
        let mut entries: Vec<Entry> = map
            .iter()
            .map(|((c, t, f), fb)| Entry {
                commit: c.clone(),
                test: t.clone(),
                fingerprint: *f,
                feedback: fb.clone(),
            })
            .collect();
        entries.sort_by(|a, b| {
            (&a.commit, &a.test, a.fingerprint).cmp(&(&b.commit, &b.test, b.fingerprint))
        });
        let mut out = std::fs::File::create(path)?;
        for e in entries {
            writeln!(out, "{}", serde_json::to_string(&e)?)?;
        }
        Ok(())
    }
}

/// Evaluate adapter that consults the shared cache before its inner
/// evaluator and writes results through.
pub struct SharedCachedEvaluator<E> {
    inner: E,
    cache: Arc<SharedFeedbackCache>,
}

impl<E: Evaluate> SharedCachedEvaluator<E> {
    pub fn new(inner: E, cache: Arc<SharedFeedbackCache>) -> Self {
        Self { inner, cache }
    }

    pub fn inner(&mut self) -> &mut E {
        &mut self.inner
    }
}

impl<E: Evaluate> Evaluate for SharedCachedEvaluator<E> {
    fn evaluate(&mut self, rev: &CommitId, test: &TestId) -> Result<Feedback, EvalError> {
        if let Some(fb) = self.cache.get(&rev.id, test, 0) {
            return Ok(fb);
        }
        let fb = self.inner.evaluate(rev, test)?;
        self.cache.insert(&rev.id, test, 0, fb.clone());
        Ok(fb)
    }

    fn fresh_evaluations(&self) -> u64 {
        self.inner.fresh_evaluations()
    }
}

/// Tree-runner wrapper caching verdicts by `(environment, test, tree
/// content)`. Because the key is pure content, a warm cache answers every
/// probe of an unchanged repository without invoking the wrapped runner at
/// all, which is what makes re-mining idempotent and free.
pub struct CachedTreeRunner<R> {
    inner: R,
    cache: Arc<SharedFeedbackCache>,
    invocations: Arc<AtomicU64>,
}

impl<R> CachedTreeRunner<R> {
    pub fn new(inner: R, cache: Arc<SharedFeedbackCache>) -> Self {
        Self {
            inner,
            cache,
            invocations: Arc::new(AtomicU64::new(0)),
        }
    }

    /// Underlying runner invocations (cache misses) across all clones.
    pub fn invocations(&self) -> u64 {
        self.invocations.load(Ordering::Relaxed)
    }

    pub fn invocation_counter(&self) -> Arc<AtomicU64> {
        Arc::clone(&self.invocations)
    }
}

impl<R: Clone> Clone for CachedTreeRunner<R> {
    fn clone(&self) -> Self {
        Self {
            inner: self.inner.clone(),
            cache: Arc::clone(&self.cache),
            invocations: Arc::clone(&self.invocations),
        }
    }
}

fn content_key(tree: &regress_core::tree::SourceTree, env: &regress_core::migrate::EnvironmentMetadata) -> (String, u64) {
    let mut buf = String::new();
    buf.push_str(&env.language_level);
    for (k, v) in &env.library_versions {
        buf.push('\x1f');
        buf.push_str(k);
        buf.push('=');
        buf.push_str(v);
    }
    let env_part = regress_core::text::fnv1a64(buf.as_bytes());
    let mut tb = String::new();
    for (path, content) in tree.iter() {
        tb.push_str(path);
        tb.push('\x1f');
        tb.push_str(content);
        tb.push('\x1e');
    }
    let tree_part = regress_core::text::fnv1a64(tb.as_bytes());
    (format!("tree:{env_part:016x}"), tree_part)
}

impl<R: regress_core::evaluator::TreeRunner> regress_core::evaluator::TreeRunner
    for CachedTreeRunner<R>
{
    fn run(
        &mut self,
        tree: &regress_core::tree::SourceTree,
        env: &regress_core::migrate::EnvironmentMetadata,
        test: &TestId,
    ) -> Result<Feedback, EvalError> {
        let (commit_key, fp) = content_key(tree, env);
        if let Some(fb) = self.cache.get(&commit_key, test, fp) {
            return Ok(fb);
        }
        let fb = self.inner.run(tree, env, test)?;
        self.invocations.fetch_add(1, Ordering::Relaxed);
        self.cache.insert(&commit_key, test, fp, fb.clone());
        Ok(fb)
    }
}
