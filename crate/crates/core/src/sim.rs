//! Deterministic synthetic repositories with planted regressions.
//!
//! The generator writes small DSL projects commit by commit: a feature
//! method whose body goes working → broken → fixed at the planted indices, a
//! regression test added at the fixing commit, churn on utility methods, and
//! optional no-feedback regions (a deliberately unparsable sentinel file)
//! and environment shifts. Identical specs produce byte-identical trees.
//!
//! The in-memory [`SimRunner`] executes trees: parse everything, reject
//! trees with unresolved test dependencies or annotations the revision's
//! language level forbids, then pass/fail on `expect` lines. The
//! [`linear_scan_oracle`] evaluates every commit sequentially and answers
//! the questions the searches answer, by brute force.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;
use serde::{Deserialize, Serialize};

use crate::diff::diff_trees;
use crate::dsl::{self, DslParser, ParserAdapter};
use crate::evaluator::{MigratingEvaluator, MigrationSettings, RevisionStore, TreeRunner};
use crate::history::{
    CommitHistory, CommitId, EvalError, Evaluate, FailureSignature, Feedback, NoFeedbackReason,
    TestId,
};
use crate::migrate::{compare_versions, EnvironmentMetadata};
use crate::model::{CodeElement, ElementKind};
use crate::tree::SourceTree;

pub const NF_SENTINEL_FILE: &str = "src/main/Broken.dsl";
pub const FEATURE_ELEMENT: &str = "Feature.compute";
pub const DEFAULT_TEST: &str = "FeatureTest.testComputeOk";

// ---------------------------------------------------------------------------
// Specs and ground truth
// ---------------------------------------------------------------------------

/// A regression to plant: works before `inducing_index`, fails from there to
/// `fixing_index`, fixed (with its new test) at `fixing_index`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedRegression {
    pub working_start: usize,
    pub inducing_index: usize,
    pub fixing_index: usize,
    pub feature_elements: Vec<String>,
    pub test_name: String,
}

/// A bug-fixing (but non-regression) event: the element is broken from its
/// introduction until the fix, so its test never passed before.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NonRegressionFix {
    pub introduced: usize,
    pub fixing_index: usize,
    pub element: String,
    pub test_name: String,
}

/// Environment change: commits with index < `at` carry `before`; later
/// commits carry the spec's base environment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvShift {
    pub at: usize,
    pub before: EnvironmentMetadata,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistorySpec {
    pub length: usize,
    pub seed: u64,
    pub churn_rate: f64,
    /// Commits that modify the planted feature before its fix (regression
    /// potential fuel).
    pub feature_churn: usize,
    pub plant: Option<PlantedRegression>,
    pub non_regression: Option<NonRegressionFix>,
    /// Inclusive index intervals evaluating to no feedback.
    pub nf_regions: Vec<(usize, usize)>,
    pub env_shift: Option<EnvShift>,
}

impl Default for HistorySpec {
    fn default() -> Self {
        Self {
            length: 16,
            seed: 0,
            churn_rate: 0.3,
            feature_churn: 0,
            plant: None,
            non_regression: None,
            nf_regions: Vec::new(),
            env_shift: None,
        }
    }
}

/// What the generator actually planted, for test assertions.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub plant: Option<PlantedRegression>,
    pub non_regression: Option<NonRegressionFix>,
    pub nf_regions: Vec<(usize, usize)>,
    /// `(commit index, element)` for every generated modification.
    pub churn_log: Vec<(usize, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvalidSpec(pub String);

impl fmt::Display for InvalidSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid history spec: {}", self.0)
    }
}

#[cfg(feature = "std")]
impl std::error::Error for InvalidSpec {}

// ---------------------------------------------------------------------------
// Spec text format
// ---------------------------------------------------------------------------

/// Parses the structured-text spec format:
///
/// ```text
/// length 24
/// seed 7
/// churn_rate 0.3
/// feature_churn 4
/// nf 10 12
/// plant working_start=0 ric=9 rfc=18 test=FeatureTest.testComputeOk features=Feature.compute
/// non_regression introduced=5 rfc=14 element=Legacy.parse test=LegacyTest.testParseOk
/// env_shift at=8 lang_before=1.5
/// ```
pub fn parse_spec(text: &str) -> Result<HistorySpec, InvalidSpec> {
    let mut spec = HistorySpec::default();
    let kv = |tok: &str| -> Option<(String, String)> {
        tok.split_once('=').map(|(k, v)| (k.into(), v.into()))
    };
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |msg: &str| InvalidSpec(format!("line {}: {}", i + 1, msg));
        let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
        match key {
            "length" => spec.length = rest.trim().parse().map_err(|_| bad("bad length"))?,
            "seed" => spec.seed = rest.trim().parse().map_err(|_| bad("bad seed"))?,
            "churn_rate" => {
                spec.churn_rate = rest.trim().parse().map_err(|_| bad("bad churn_rate"))?
            }
            "feature_churn" => {
                spec.feature_churn = rest.trim().parse().map_err(|_| bad("bad feature_churn"))?
            }
            "nf" => {
                let mut it = rest.split_whitespace();
                let lo = it
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| bad("nf needs two indices"))?;
                let hi = it
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| bad("nf needs two indices"))?;
                spec.nf_regions.push((lo, hi));
            }
            "plant" => {
                let mut plant = PlantedRegression {
                    working_start: 0,
                    inducing_index: 0,
                    fixing_index: 0,
                    feature_elements: alloc::vec![FEATURE_ELEMENT.to_string()],
                    test_name: DEFAULT_TEST.to_string(),
                };
                for tok in rest.split_whitespace() {
                    let (k, v) = kv(tok).ok_or_else(|| bad("plant expects key=value"))?;
                    match k.as_str() {
                        "working_start" => {
                            plant.working_start = v.parse().map_err(|_| bad("bad working_start"))?
                        }
                        "ric" => {
                            plant.inducing_index = v.parse().map_err(|_| bad("bad ric"))?
                        }
                        "rfc" => plant.fixing_index = v.parse().map_err(|_| bad("bad rfc"))?,
                        "test" => plant.test_name = v,
                        "features" => {
                            plant.feature_elements = v.split(',').map(String::from).collect()
                        }
                        _ => return Err(bad(&format!("unknown plant key `{k}`"))),
                    }
                }
                spec.plant = Some(plant);
            }
            "non_regression" => {
                let mut nr = NonRegressionFix {
                    introduced: 0,
                    fixing_index: 0,
                    element: "Legacy.parse".into(),
                    test_name: "LegacyTest.testParseOk".into(),
                };
                for tok in rest.split_whitespace() {
                    let (k, v) = kv(tok).ok_or_else(|| bad("non_regression expects key=value"))?;
                    match k.as_str() {
                        "introduced" => {
                            nr.introduced = v.parse().map_err(|_| bad("bad introduced"))?
                        }
                        "rfc" => nr.fixing_index = v.parse().map_err(|_| bad("bad rfc"))?,
                        "element" => nr.element = v,
                        "test" => nr.test_name = v,
                        _ => return Err(bad(&format!("unknown non_regression key `{k}`"))),
                    }
                }
                spec.non_regression = Some(nr);
            }
            "env_shift" => {
                let mut at = 0usize;
                let mut before = EnvironmentMetadata::with_language_level("1.5");
                for tok in rest.split_whitespace() {
                    let (k, v) = kv(tok).ok_or_else(|| bad("env_shift expects key=value"))?;
                    match k.as_str() {
                        "at" => at = v.parse().map_err(|_| bad("bad at"))?,
                        "lang_before" => before.language_level = v,
                        _ => return Err(bad(&format!("unknown env_shift key `{k}`"))),
                    }
                }
                spec.env_shift = Some(EnvShift { at, before });
            }
            other => return Err(InvalidSpec(format!("line {}: unknown key `{other}`", i + 1))),
        }
    }
    Ok(spec)
}

/// Renders a spec back to the text format (inverse of [`parse_spec`]).
pub fn render_spec(spec: &HistorySpec) -> String {
    let mut out = String::new();
    out.push_str(&format!("length {}\n", spec.length));
    out.push_str(&format!("seed {}\n", spec.seed));
    out.push_str(&format!("churn_rate {}\n", spec.churn_rate));
    if spec.feature_churn > 0 {
        out.push_str(&format!("feature_churn {}\n", spec.feature_churn));
    }
    for (lo, hi) in &spec.nf_regions {
        out.push_str(&format!("nf {lo} {hi}\n"));
    }
    if let Some(p) = &spec.plant {
        out.push_str(&format!(
            "plant working_start={} ric={} rfc={} test={} features={}\n",
            p.working_start,
            p.inducing_index,
            p.fixing_index,
            p.test_name,
            p.feature_elements.join(",")
        ));
    }
    if let Some(nr) = &spec.non_regression {
        out.push_str(&format!(
            "non_regression introduced={} rfc={} element={} test={}\n",
            nr.introduced, nr.fixing_index, nr.element, nr.test_name
        ));
    }
    if let Some(es) = &spec.env_shift {
        out.push_str(&format!(
            "env_shift at={} lang_before={}\n",
            es.at, es.before.language_level
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// Deterministic PRNG
// ---------------------------------------------------------------------------

/// SplitMix64: tiny, seed-stable forever, good enough for generator jitter.
#[derive(Debug, Clone)]
pub struct SplitMix64(u64);

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, bound)`; `bound` must be positive.
    pub fn below(&mut self, bound: usize) -> usize {
        (self.next_u64() % bound as u64) as usize
    }

    /// Uniform in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

const UTIL_METHODS: usize = 4;

#[derive(Debug, Clone)]
struct World {
    /// element qualified name → body lines for mutable bodies
    bodies: BTreeMap<String, Vec<String>>,
    legacy_present: bool,
    printer_render_present: bool,
    test_present: BTreeMap<String, bool>,
}

/// A generated repository: linearized history, one tree and one environment
/// per commit.
#[derive(Debug, Clone)]
pub struct SimRepo {
    pub history: CommitHistory,
    pub trees: Vec<Arc<SourceTree>>,
    pub envs: Vec<EnvironmentMetadata>,
    pub spec: HistorySpec,
}

fn validate(spec: &HistorySpec) -> Result<(), InvalidSpec> {
    if spec.length == 0 {
        return Err(InvalidSpec("length must be positive".into()));
    }
    if let Some(p) = &spec.plant {
        if !(p.working_start < p.inducing_index && p.inducing_index < p.fixing_index) {
            return Err(InvalidSpec(
                "plant requires working_start < ric < rfc".into(),
            ));
        }
        if p.fixing_index >= spec.length {
            return Err(InvalidSpec("plant rfc outside history".into()));
        }
    }
    if let Some(nr) = &spec.non_regression {
        if nr.introduced >= nr.fixing_index || nr.fixing_index >= spec.length {
            return Err(InvalidSpec("non_regression indices out of order".into()));
        }
    }
    for &(lo, hi) in &spec.nf_regions {
        if lo > hi || hi >= spec.length {
            return Err(InvalidSpec(format!("nf region ({lo}, {hi}) out of range")));
        }
        if lo == 0 || hi == spec.length - 1 {
            return Err(InvalidSpec(
                "nf regions may not include the first or last commit".into(),
            ));
        }
    }
    Ok(())
}

fn render_world(world: &World, spec: &HistorySpec, nf: bool) -> SourceTree {
    let mut tree = SourceTree::new();
    let body_of = |name: &str| -> String {
        world
            .bodies
            .get(name)
            .map(|lines| lines.join("\n"))
            .unwrap_or_default()
    };

    let mut feature = String::new();
    feature.push_str("class Feature {\n");
    feature.push_str("  method compute() -> int {\n");
    for l in body_of(FEATURE_ELEMENT).lines() {
        feature.push_str(&format!("    {l}\n"));
    }
    feature.push_str("  }\n");
    feature.push_str("  method describe() -> string {\n    line a stable sibling\n  }\n");
    feature.push_str("}\n");
    tree.insert("src/main/Feature.dsl", feature);

    let mut util = String::new();
    util.push_str("class Util {\n");
    for m in 0..UTIL_METHODS {
        util.push_str(&format!("  method helper{m}() -> int {{\n"));
        for l in body_of(&format!("Util.helper{m}")).lines() {
            util.push_str(&format!("    {l}\n"));
        }
        util.push_str("  }\n");
    }
    util.push_str("}\n");
    tree.insert("src/main/Util.dsl", util);

    if spec.env_shift.is_some() {
        let mut printer = String::new();
        printer.push_str("interface Output {\n  method render() -> string {\n  }\n}\n");
        printer.push_str("class Printer implements Output {\n");
        if world.printer_render_present {
            printer.push_str("  @Override\n  method render() -> string {\n");
            for l in body_of("Printer.render").lines() {
                printer.push_str(&format!("    {l}\n"));
            }
            printer.push_str("  }\n");
        }
        printer.push_str("}\n");
        tree.insert("src/main/Printer.dsl", printer);
    }

    if world.legacy_present {
        let mut legacy = String::new();
        legacy.push_str("class Legacy {\n  method parse() -> int {\n");
        for l in body_of("Legacy.parse").lines() {
            legacy.push_str(&format!("    {l}\n"));
        }
        legacy.push_str("  }\n}\n");
        tree.insert("src/main/Legacy.dsl", legacy);
    }

    // baseline tests, present from the first commit
    let mut util_test = String::new();
    util_test.push_str("class UtilTest {\n");
    util_test.push_str("  method testHelperZeroOk() {\n    expect Util.helper0 ok\n  }\n");
    util_test.push_str("  method testHelperOneOk() {\n    expect Util.helper1 ok\n  }\n");
    util_test.push_str("}\n");
    tree.insert("src/test/UtilTest.dsl", util_test);

    if let Some(p) = &spec.plant {
        if *world.test_present.get(&p.test_name).unwrap_or(&false) {
            let (class, method) = p.test_name.split_once('.').unwrap_or(("FeatureTest", "t"));
            let mut t = String::new();
            t.push_str(&format!("class {class} {{\n"));
            t.push_str(&format!("  method {method}() {{\n"));
            for fe in &p.feature_elements {
                t.push_str(&format!("    expect {fe} ok\n"));
            }
            if spec.env_shift.is_some() {
                t.push_str("    expect Printer.render ok\n");
            }
            t.push_str("  }\n}\n");
            tree.insert(format!("src/test/{class}.dsl"), t);
        }
    }
    if let Some(nr) = &spec.non_regression {
        if *world.test_present.get(&nr.test_name).unwrap_or(&false) {
            let (class, method) = nr.test_name.split_once('.').unwrap_or(("LegacyTest", "t"));
            let mut t = String::new();
            t.push_str(&format!("class {class} {{\n"));
            t.push_str(&format!("  method {method}() {{\n"));
            t.push_str(&format!("    expect {} ok\n", nr.element));
            t.push_str("  }\n}\n");
            tree.insert(format!("src/test/{class}.dsl"), t);
        }
    }

    if nf {
        tree.insert(NF_SENTINEL_FILE, "class Broken {\n");
    }
    tree
}

/// Generates the repository and its ground truth. Identical specs yield
/// byte-identical trees.
pub fn generate(spec: &HistorySpec) -> Result<(SimRepo, GroundTruth), InvalidSpec> {
    validate(spec)?;
    // commit ids carry a spec fingerprint so distinct synthetic
    // repositories never share ids (they key persistent caches)
    let spec_fp = (crate::text::fnv1a64(render_spec(spec).as_bytes()) & 0xffff_ffff) as u32;
    let mut rng = SplitMix64::new(spec.seed);
    let mut truth = GroundTruth {
        plant: spec.plant.clone(),
        non_regression: spec.non_regression.clone(),
        nf_regions: spec.nf_regions.clone(),
        churn_log: Vec::new(),
    };

    // initial world
    let mut world = World {
        bodies: BTreeMap::new(),
        legacy_present: false,
        printer_render_present: false,
        test_present: BTreeMap::new(),
    };
    // a realistically sized body: single-line churn then shifts similarity
    // only a little, as edits do in real methods
    let mut feature_body: Vec<String> = alloc::vec!["calls Util.helper0".into(), "line seed value".into()];
    for i in 0..20 {
        feature_body.push(format!("line work step {i}"));
    }
    world.bodies.insert(FEATURE_ELEMENT.into(), feature_body);
    for m in 0..UTIL_METHODS {
        world
            .bodies
            .insert(format!("Util.helper{m}"), alloc::vec![format!("line util body {m}")]);
    }

    // pre-draw the feature churn commits: distinct modifications landing
    // while the feature still works, before the inducing commit
    let feature_churn_at: Vec<usize> = if let (Some(p), true) = (&spec.plant, spec.feature_churn > 0)
    {
        let lo = p.working_start + 1;
        let mut slots: Vec<usize> = (lo..p.inducing_index).collect();
        // partial Fisher–Yates, deterministic per seed
        let take = spec.feature_churn.min(slots.len());
        for i in 0..take {
            let j = i + rng.below(slots.len() - i);
            slots.swap(i, j);
        }
        slots.truncate(take);
        slots
    } else {
        Vec::new()
    };

    let in_nf = |k: usize| spec.nf_regions.iter().any(|&(lo, hi)| k >= lo && k <= hi);

    let mut trees: Vec<Arc<SourceTree>> = Vec::with_capacity(spec.length);
    let mut envs = Vec::with_capacity(spec.length);
    let mut commits = Vec::with_capacity(spec.length);
    let mut history = CommitHistory {
        branch: "main".into(),
        commits: Vec::new(),
        diffs: BTreeMap::new(),
    };
    let empty = SourceTree::new();

    for k in 0..spec.length {
        // apply this commit's events to the world
        if k > 0 && spec.churn_rate > 0.0 && rng.unit() < spec.churn_rate {
            let m = rng.below(UTIL_METHODS);
            let name = format!("Util.helper{m}");
            world
                .bodies
                .get_mut(&name)
                .expect("util body exists")
                .push(format!("line churn {k}"));
            truth.churn_log.push((k, name));
        }
        for _ in feature_churn_at.iter().filter(|&&at| at == k) {
            world
                .bodies
                .get_mut(FEATURE_ELEMENT)
                .expect("feature body exists")
                .push(format!("line tweak {k}"));
            truth.churn_log.push((k, FEATURE_ELEMENT.into()));
        }
        if let Some(p) = &spec.plant {
            if k == p.inducing_index {
                for fe in &p.feature_elements {
                    world
                        .bodies
                        .get_mut(fe.as_str())
                        .expect("feature body exists")
                        .push("fail regression boom".into());
                    truth.churn_log.push((k, fe.clone()));
                }
            }
            if k == p.fixing_index {
                for fe in &p.feature_elements {
                    let body = world.bodies.get_mut(fe.as_str()).expect("feature body exists");
                    body.retain(|l| !l.starts_with("fail "));
                    body.push("line guard added".into());
                    truth.churn_log.push((k, fe.clone()));
                }
                world.test_present.insert(p.test_name.clone(), true);
            }
        }
        if let Some(nr) = &spec.non_regression {
            if k == nr.introduced {
                world.legacy_present = true;
                world.bodies.insert(
                    nr.element.clone(),
                    alloc::vec!["fail legacy broken".into()],
                );
                truth.churn_log.push((k, nr.element.clone()));
            }
            if k == nr.fixing_index {
                world.bodies.insert(
                    nr.element.clone(),
                    alloc::vec!["line parse fixed".into()],
                );
                world.test_present.insert(nr.test_name.clone(), true);
                truth.churn_log.push((k, nr.element.clone()));
            }
        }
        if let Some(es) = &spec.env_shift {
            if k == es.at {
                world.printer_render_present = true;
                world
                    .bodies
                    .insert("Printer.render".into(), alloc::vec!["line render output".into()]);
            }
        }
        let tree = Arc::new(render_world(&world, spec, in_nf(k)));
        let env = match &spec.env_shift {
            Some(es) if k < es.at => es.before.clone(),
            _ => EnvironmentMetadata::with_language_level("1.7"),
        };
        let prev: &SourceTree = if k == 0 { &empty } else { &trees[k - 1] };
        history.diffs.insert(k, diff_trees(prev, &tree));
        commits.push(CommitId::new(format!("c{k:04x}-{spec_fp:08x}"), k));
        trees.push(tree);
        envs.push(env);
    }
    history.commits = commits;

    Ok((
        SimRepo {
            history,
            trees,
            envs,
            spec: spec.clone(),
        },
        truth,
    ))
}

// ---------------------------------------------------------------------------
// The in-memory runner
// ---------------------------------------------------------------------------

/// Executes a test against a DSL tree without any real build system.
#[derive(Debug, Clone, Copy, Default)]
pub struct SimRunner;

impl SimRunner {
    fn check_annotations(
        model: &[CodeElement],
        env: &EnvironmentMetadata,
    ) -> Result<(), Feedback> {
        if compare_versions(&env.language_level, "1.6") != core::cmp::Ordering::Less {
            return Ok(());
        }
        for e in model {
            if !e.annotations.contains("Override") {
                continue;
            }
            let implements_iface = e
                .owner_type()
                .and_then(|owner| model.iter().find(|c| c.qualified_name == owner))
                .map(|c| !c.implements.is_empty())
                .unwrap_or(false);
            if implements_iface {
                return Err(Feedback::NoFeedback(NoFeedbackReason::CompileError));
            }
        }
        Ok(())
    }
}

impl TreeRunner for SimRunner {
    fn run(
        &mut self,
        tree: &SourceTree,
        env: &EnvironmentMetadata,
        test: &TestId,
    ) -> Result<Feedback, EvalError> {
        // 1. every DSL file must parse
        let parser = DslParser;
        let mut model = Vec::new();
        for (path, content) in tree.iter() {
            if !parser.recognizes(path) {
                continue;
            }
            match dsl::parse_file(path, content) {
                Ok(parsed) => model.extend(parsed.into_elements()),
                Err(_) => return Ok(Feedback::NoFeedback(NoFeedbackReason::CompileError)),
            }
        }
        // 2. the language level must allow the annotations in use
        if let Err(fb) = Self::check_annotations(&model, env) {
            return Ok(fb);
        }
        // 3. the test must exist
        let Some(test_elem) = model
            .iter()
            .find(|e| e.kind == ElementKind::Method && e.qualified_name == test.as_str())
        else {
            return Ok(Feedback::NoFeedback(NoFeedbackReason::TestUnresolvable));
        };
        // 4. the test's dependency closure must resolve
        let (_closure, unresolved) =
            crate::migrate::dependency_closure(test.as_str(), &model, None);
        if !unresolved.is_empty() {
            return Ok(Feedback::NoFeedback(NoFeedbackReason::CompileError));
        }
        // 5. expectations decide pass/fail
        let by_name: BTreeMap<&str, &CodeElement> =
            model.iter().map(|e| (e.qualified_name.as_str(), e)).collect();
        for (i, line) in test_elem.body.lines().enumerate() {
            let Some(rest) = line.strip_prefix("expect ") else {
                continue;
            };
            let Some(target) = rest.split_whitespace().next() else {
                continue;
            };
            let Some(elem) = by_name.get(target) else {
                return Ok(Feedback::NoFeedback(NoFeedbackReason::CompileError));
            };
            if let Some(fail_line) = elem.body.lines().find(|l| l.starts_with("fail ")) {
                return Ok(Feedback::Fail(FailureSignature {
                    message: fail_line["fail ".len()..].to_string(),
                    file: test_elem.owner_file.clone(),
                    line: (i + 1) as u32,
                }));
            }
        }
        Ok(Feedback::Pass)
    }
}

// ---------------------------------------------------------------------------
// Store + evaluators
// ---------------------------------------------------------------------------

impl RevisionStore for SimRepo {
    fn len(&self) -> usize {
        self.history.len()
    }

    fn commit(&self, index: usize) -> &CommitId {
        &self.history.commits[index]
    }

    fn tree(&mut self, index: usize) -> Result<Arc<SourceTree>, EvalError> {
        Ok(self.trees[index].clone())
    }

    fn env(&mut self, index: usize) -> EnvironmentMetadata {
        self.envs[index].clone()
    }
}

impl SimRepo {
    /// Migration-aware evaluator for a test whose source revision is
    /// `fix_index` (typically the planted fixing commit).
    pub fn evaluator(
        &self,
        fix_index: usize,
        test: &TestId,
        settings: MigrationSettings,
    ) -> MigratingEvaluator<SimRepo, SimRunner> {
        MigratingEvaluator::new(self.clone(), SimRunner, fix_index, test.clone(), settings)
    }
}

// ---------------------------------------------------------------------------
// Brute-force oracle
// ---------------------------------------------------------------------------

/// Every commit's feedback, obtained by exhaustive sequential evaluation.
#[derive(Debug, Clone)]
pub struct OracleScan {
    pub feedbacks: Vec<Feedback>,
}

impl OracleScan {
    /// Smallest index whose feedback is Fail while the predecessor passes.
    pub fn first_fail(&self) -> Option<usize> {
        (1..self.feedbacks.len()).find(|&i| {
            self.feedbacks[i].is_fail() && self.feedbacks[i - 1].is_pass()
        })
    }

    /// The feedback revision strictly between `v` and `b` closest to `v`,
    /// or `b` when the whole stretch lacks feedback.
    pub fn closest_feedback(&self, v: usize, b: usize) -> usize {
        let step: i64 = if b > v { 1 } else { -1 };
        let mut i = v as i64 + step;
        while i != b as i64 {
            if self.feedbacks[i as usize].has_feedback() {
                return i as usize;
            }
            i += step;
        }
        b
    }
}

/// Evaluates every commit of the history in order. Costs exactly `length`
/// evaluations on a cold evaluator.
pub fn linear_scan_oracle<E: Evaluate + ?Sized>(
    history: &CommitHistory,
    test: &TestId,
    eval: &mut E,
) -> Result<OracleScan, EvalError> {
    let mut feedbacks = Vec::with_capacity(history.len());
    for c in &history.commits {
        feedbacks.push(eval.evaluate(c, test)?);
    }
    Ok(OracleScan { feedbacks })
}
