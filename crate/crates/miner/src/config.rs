//! Miner configuration: a TOML file plus `--set key.path=value` overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use regress_core::evaluator::{MigrationMode, MigrationSettings};
use regress_core::migrate::{parse_rules, RewriteRule, DEFAULT_RULES};
use regress_core::model::SimilarityWeights;
use regress_core::potential::PotentialConfig;
use regress_core::search::SearchBudget;
use regress_core::semantics::LabelThresholds;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PotentialSection {
    pub p: f64,
    pub th_rp: f64,
    pub window: usize,
}

impl Default for PotentialSection {
    fn default() -> Self {
        Self {
            p: 0.05,
            th_rp: 0.3,
            window: 500,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SimilaritySection {
    pub alpha: f64,
    pub beta: f64,
    pub th_m: f64,
    /// Body-similarity gate for compatible failures across revisions.
    pub th_body: f64,
}

impl Default for SimilaritySection {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 0.5,
            th_m: 0.8,
            th_body: 0.95,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct LabelSection {
    pub th_len_r: usize,
    pub th_sim: f64,
    pub th_r: f64,
    pub th_len_f: usize,
    pub th_ar: f64,
    pub epsilon: f64,
}

impl Default for LabelSection {
    fn default() -> Self {
        let d = LabelThresholds::default();
        Self {
            th_len_r: d.th_len_r,
            th_sim: d.th_sim,
            th_r: d.th_r,
            th_len_f: d.th_len_f,
            th_ar: d.th_ar,
            epsilon: d.epsilon,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSection {
    pub max_evaluations: u64,
    pub max_span: usize,
}

impl Default for SearchSection {
    fn default() -> Self {
        let d = SearchBudget::default();
        Self {
            max_evaluations: d.max_evaluations,
            max_span: d.max_span,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunnerSection {
    /// External command per evaluation; empty means "in-memory DSL runner".
    pub command: Vec<String>,
    pub timeout_secs: u64,
    /// Extra reruns after a Fail verdict (flaky-test knob; the last verdict
    /// stands). Default 0: no retries.
    pub retries: u32,
}

impl Default for RunnerSection {
    fn default() -> Self {
        Self {
            command: Vec::new(),
            timeout_secs: 300,
            retries: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct MigrationSection {
    pub test_paths: Vec<String>,
    /// Optional rewrite-rule file; the built-in rule set applies otherwise.
    pub rules_file: Option<PathBuf>,
    /// `full` or `test-only` (the ¬TDM ablation).
    pub mode: String,
}

impl Default for MigrationSection {
    fn default() -> Self {
        Self {
            test_paths: vec!["src/test".into(), "test/".into()],
            rules_file: None,
            mode: "full".into(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct MinerConfig {
    pub potential: PotentialSection,
    pub similarity: SimilaritySection,
    pub labels: LabelSection,
    pub search: SearchSection,
    pub runner: RunnerSection,
    pub migration: MigrationSection,
    pub output_dir: PathBuf,
    pub branch: String,
    pub cache_file: Option<PathBuf>,
    /// Search strategy: `vem` (default), `bisect`, or `blame`.
    pub strategy: String,
}

impl MinerConfig {
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut value: toml::Value = match path {
            Some(p) => {
                let raw = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {p:?}"))?;
                raw.parse().with_context(|| format!("parsing config {p:?}"))?
            }
            None => toml::Value::Table(Default::default()),
        };
        for ov in overrides {
            let (key, raw) = ov
                .split_once('=')
                .with_context(|| format!("override `{ov}` must be key=value"))?;
            set_path(&mut value, key.trim(), raw.trim())?;
        }
        let mut config: MinerConfig = value.try_into().context("config shape")?;
        if config.branch.is_empty() {
            config.branch = "HEAD".into();
        }
        if config.output_dir.as_os_str().is_empty() {
            config.output_dir = PathBuf::from("out");
        }
        if config.strategy.is_empty() {
            config.strategy = "vem".into();
        }
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        if !(0.0 < self.potential.p && self.potential.p < 1.0) {
            bail!("potential.p must be in (0, 1)");
        }
        let s = &self.similarity;
        if s.alpha < 0.0 || s.beta < 0.0 || (s.alpha + s.beta - 1.0).abs() > 1e-9 {
            bail!("similarity.alpha/beta must be non-negative and sum to 1");
        }
        for (name, v) in [
            ("similarity.th_m", s.th_m),
            ("similarity.th_body", s.th_body),
            ("potential.th_rp", self.potential.th_rp),
            ("labels.th_sim", self.labels.th_sim),
        ] {
            if !(0.0..=1.0).contains(&v) {
                bail!("{name} must be within [0, 1]");
            }
        }
        if !["vem", "bisect", "blame"].contains(&self.strategy.as_str()) {
            bail!("strategy must be vem, bisect, or blame");
        }
        if !["full", "test-only"].contains(&self.migration.mode.as_str()) {
            bail!("migration.mode must be full or test-only");
        }
        Ok(())
    }

    pub fn weights(&self) -> SimilarityWeights {
        SimilarityWeights::new(self.similarity.alpha, self.similarity.beta, self.similarity.th_m)
    }

    pub fn budget(&self) -> SearchBudget {
        SearchBudget {
            max_evaluations: self.search.max_evaluations,
            max_span: self.search.max_span,
        }
    }

    pub fn potential_config(&self) -> PotentialConfig {
        PotentialConfig {
            p: self.potential.p,
            th_rp: self.potential.th_rp,
            window: self.potential.window,
        }
    }

    pub fn label_thresholds(&self) -> LabelThresholds {
        LabelThresholds {
            th_len_r: self.labels.th_len_r,
            th_sim: self.labels.th_sim,
            th_r: self.labels.th_r,
            th_len_f: self.labels.th_len_f,
            th_ar: self.labels.th_ar,
            epsilon: self.labels.epsilon,
        }
    }

    pub fn rules(&self) -> Result<Vec<RewriteRule>> {
        match &self.migration.rules_file {
            Some(path) => {
                let raw = std::fs::read_to_string(path)
                    .with_context(|| format!("reading rules {path:?}"))?;
                parse_rules(&raw).map_err(|e| anyhow::anyhow!("{e}"))
            }
            None => Ok(parse_rules(DEFAULT_RULES).expect("built-in rules parse")),
        }
    }

    pub fn migration_settings(&self) -> Result<MigrationSettings> {
        Ok(MigrationSettings {
            weights: self.weights(),
            rules: self.rules()?,
            test_paths: self.migration.test_paths.clone(),
            mode: if self.migration.mode == "test-only" {
                MigrationMode::TestOnly
            } else {
                MigrationMode::Full
            },
        })
    }
}

fn set_path(root: &mut toml::Value, dotted: &str, raw: &str) -> Result<()> {
    // bare scalars are not TOML documents; try the scalar types in order
    let parsed: toml::Value = if let Ok(i) = raw.parse::<i64>() {
        toml::Value::Integer(i)
    } else if let Ok(f) = raw.parse::<f64>() {
        toml::Value::Float(f)
    } else if let Ok(b) = raw.parse::<bool>() {
        toml::Value::Boolean(b)
    } else {
        toml::Value::String(raw.to_string())
    };
    let mut cur = root;
    let parts: Vec<&str> = dotted.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let table = cur
            .as_table_mut()
            .with_context(|| format!("`{dotted}`: `{part}` is not a table"))?;
        if i + 1 == parts.len() {
            table.insert(part.to_string(), parsed);
            return Ok(());
        }
        cur = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(Default::default()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let config = MinerConfig::load(None, &[]).unwrap();
        assert_eq!(config.potential.p, 0.05);
        assert_eq!(config.potential.th_rp, 0.3);
        assert_eq!(config.similarity.th_body, 0.95);
        assert_eq!(config.runner.timeout_secs, 300);
        assert_eq!(config.runner.retries, 0);
        assert_eq!(config.strategy, "vem");
    }

    #[test]
    fn overrides_apply_and_validate() {
        let config = MinerConfig::load(
            None,
            &["potential.p=0.1".into(), "strategy=bisect".into()],
        )
        .unwrap();
        assert_eq!(config.potential.p, 0.1);
        assert_eq!(config.strategy, "bisect");
        assert!(MinerConfig::load(None, &["potential.p=1.5".into()]).is_err());
        assert!(MinerConfig::load(None, &["strategy=magic".into()]).is_err());
    }

    #[test]
    fn config_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("miner.toml");
        std::fs::write(
            &path,
            "output_dir = \"results\"\n[potential]\np = 0.02\n[runner]\ncommand = [\"./run.sh\"]\n",
        )
        .unwrap();
        let config = MinerConfig::load(Some(&path), &["potential.window=50".into()]).unwrap();
        assert_eq!(config.potential.p, 0.02);
        assert_eq!(config.potential.window, 50);
        assert_eq!(config.output_dir, PathBuf::from("results"));
        assert_eq!(config.runner.command, vec!["./run.sh".to_string()]);
    }
}
