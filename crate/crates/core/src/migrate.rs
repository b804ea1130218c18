//! Test-dependency migration: what to copy into an old revision, and the
//! reconciliation decision tree that keeps copying/rewriting until the test
//! resolves there.
//!
//! The planning side is pure set calculus over aligned element models. The
//! elements to copy are the test's dependency closure minus whatever already
//! matches in the target revision; fix-carrying elements are never migrated,
//! because copying the fix would make the test pass on revisions where the
//! bug is still present.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use serde::{Deserialize, Serialize};

use crate::dsl;
use crate::history::{EvalError, Feedback};
use crate::model::{is_test_element, CodeElement, ElementKind, SimilarityWeights};
use crate::model::{align_revisions, Alignment};
use crate::text::fnv1a64;
use crate::tree::SourceTree;

// ---------------------------------------------------------------------------
// Planning
// ---------------------------------------------------------------------------

/// Element sets driving one migration, all in fixing-revision name space.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MigrationPlan {
    /// Elements carrying the fix; never migrated.
    pub e_fix: BTreeSet<String>,
    /// Dependency closure of the test (static references ∪ coverage).
    pub e_dep: BTreeSet<String>,
    /// Identically aligned elements between the two revisions.
    pub e_id: BTreeSet<String>,
    /// Matched-but-modified elements.
    pub e_mod: BTreeSet<String>,
    /// Dependencies absent from the target revision: to copy in.
    pub e_miss: BTreeSet<String>,
    /// Dependencies present but modified: candidates for overwriting.
    pub e_change: BTreeSet<String>,
    /// Target-revision counterpart names for modified dependencies.
    pub counterparts: BTreeMap<String, String>,
}

/// Elements of the fixing revision where the fix happens: bodies that differ
/// from the aligned predecessor element, plus brand-new production elements.
/// Test elements are excluded.
pub fn patch_elements(
    bfc_model: &[CodeElement],
    bfc_prev_model: &[CodeElement],
    w: &SimilarityWeights,
    test_paths: &[String],
) -> BTreeSet<String> {
    let alignment = align_revisions(bfc_model, bfc_prev_model, w);
    let modified = alignment.modified_in_a();
    let mut out = BTreeSet::new();
    for e in bfc_model {
        if is_test_element(e, test_paths) {
            continue;
        }
        let name = e.qualified_name.as_str();
        if modified.contains(name) || alignment.only_in_a.contains(name) {
            out.insert(e.qualified_name.clone());
        }
    }
    out
}

/// Transitive closure over `references` rooted at the test, unioned with an
/// optional adapter-supplied coverage set. Includes the test itself.
/// Unresolved references are recorded and do not stop the closure.
pub fn dependency_closure(
    test: &str,
    model: &[CodeElement],
    coverage: Option<&BTreeSet<String>>,
) -> (BTreeSet<String>, Vec<String>) {
    let by_name: BTreeMap<&str, &CodeElement> =
        model.iter().map(|e| (e.qualified_name.as_str(), e)).collect();
    let mut closure = BTreeSet::new();
    let mut unresolved = Vec::new();
    let mut stack = alloc::vec![test.to_string()];
    while let Some(name) = stack.pop() {
        if !closure.insert(name.clone()) {
            continue;
        }
        match by_name.get(name.as_str()) {
            Some(e) => {
                for r in &e.references {
                    if !closure.contains(r) {
                        stack.push(r.clone());
                    }
                }
            }
            None => unresolved.push(name.clone()),
        }
    }
    // unresolved names are not part of the closure proper
    for u in &unresolved {
        closure.remove(u);
    }
    if let Some(cov) = coverage {
        for c in cov {
            if by_name.contains_key(c.as_str()) {
                closure.insert(c.clone());
            }
        }
    }
    (closure, unresolved)
}

/// The migration set calculus. Modified dependencies are not "missing" (they
/// exist in the target revision), so the two outputs are always disjoint:
///
/// ```text
/// e_miss   = e_dep \ (e_fix ∪ E_id ∪ E_mod)
/// e_change = e_dep ∩ (E_mod \ e_fix)
/// ```
pub fn migration_sets(
    e_dep: &BTreeSet<String>,
    e_fix: &BTreeSet<String>,
    alignment: &Alignment,
) -> (BTreeSet<String>, BTreeSet<String>) {
    let identical: BTreeSet<&str> = alignment.identical_in_a();
    let modified: BTreeSet<&str> = alignment.modified_in_a();
    let mut e_miss = BTreeSet::new();
    let mut e_change = BTreeSet::new();
    for d in e_dep {
        if e_fix.contains(d) {
            continue;
        }
        if modified.contains(d.as_str()) {
            e_change.insert(d.clone());
        } else if !identical.contains(d.as_str()) {
            e_miss.insert(d.clone());
        }
    }
    (e_miss, e_change)
}

/// Builds the full plan for migrating `test` from the fixing revision into
/// a revision under investigation.
pub fn plan_migration(
    bfc_model: &[CodeElement],
    bfc_prev_model: &[CodeElement],
    c_inv_model: &[CodeElement],
    test: &str,
    coverage: Option<&BTreeSet<String>>,
    w: &SimilarityWeights,
    test_paths: &[String],
) -> MigrationPlan {
    let e_fix = patch_elements(bfc_model, bfc_prev_model, w, test_paths);
    let (e_dep, _unresolved) = dependency_closure(test, bfc_model, coverage);
    let alignment = align_revisions(bfc_model, c_inv_model, w);
    let (e_miss, e_change) = migration_sets(&e_dep, &e_fix, &alignment);
    let counterparts = e_change
        .iter()
        .filter_map(|n| {
            alignment
                .counterpart_of(n)
                .map(|c| (n.clone(), c.to_string()))
        })
        .collect();
    MigrationPlan {
        e_fix,
        e_dep,
        e_id: alignment.identical_in_a().iter().map(|s| s.to_string()).collect(),
        e_mod: alignment.modified_in_a().iter().map(|s| s.to_string()).collect(),
        e_miss,
        e_change,
        counterparts,
    }
}

// ---------------------------------------------------------------------------
// Applying elements to a tree
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MigrateError {
    Edit(dsl::EditError),
    UnknownElement(String),
}

impl fmt::Display for MigrateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MigrateError::Edit(e) => write!(f, "{e}"),
            MigrateError::UnknownElement(q) => write!(f, "no source for element `{q}`"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for MigrateError {}

fn kind_rank(kind: ElementKind) -> u8 {
    match kind {
        ElementKind::Interface => 0,
        ElementKind::Class => 1,
        ElementKind::Field => 2,
        ElementKind::Method => 3,
    }
}

/// Copies elements into the tree. Elements named in `overwrite` replace
/// their target-revision counterpart (same or aligned name); everything else
/// is inserted into its owner file, created when absent. An empty element
/// set returns the tree unchanged, byte for byte.
pub fn apply_elements(
    elements: &[&CodeElement],
    tree: &SourceTree,
    overwrite: &BTreeMap<String, String>,
) -> Result<SourceTree, MigrateError> {
    let mut out = tree.clone();
    let mut ordered: Vec<&&CodeElement> = elements.iter().collect();
    ordered.sort_by_key(|e| (kind_rank(e.kind), e.qualified_name.clone()));
    for e in ordered {
        if let Some(counterpart) = overwrite.get(&e.qualified_name) {
            overwrite_element(&mut out, e, counterpart)?;
        } else {
            insert_element(&mut out, e)?;
        }
    }
    Ok(out)
}

fn file_declares(path: &str, content: &str, qualified_name: &str) -> bool {
    dsl::parse_file(path, content)
        .map(|parsed| parsed.find(qualified_name).is_some())
        .unwrap_or(false)
}

fn find_element_file(tree: &SourceTree, qualified_name: &str) -> Option<String> {
    // cheap textual pre-filter: a declaration must mention the simple name
    let simple = qualified_name.rsplit('.').next().unwrap_or(qualified_name);
    for (path, content) in tree.iter() {
        if !path.ends_with(dsl::DSL_EXT) || !content.contains(simple) {
            continue;
        }
        if file_declares(path, content, qualified_name) {
            return Some(path.to_string());
        }
    }
    None
}

fn insert_element(tree: &mut SourceTree, e: &CodeElement) -> Result<(), MigrateError> {
    // already present (e.g. the type block was created by an earlier insert)
    if find_element_file(tree, &e.qualified_name).is_some() {
        return Ok(());
    }
    match e.kind {
        ElementKind::Class | ElementKind::Interface => {
            match tree.get(&e.owner_file) {
                Some(content) => {
                    let mut lines: Vec<String> = content.lines().map(ToString::to_string).collect();
                    lines.extend(dsl::render_type(e));
                    let mut joined = lines.join("\n");
                    joined.push('\n');
                    tree.insert(e.owner_file.clone(), joined);
                }
                None => tree.insert(e.owner_file.clone(), dsl::render_new_file(e)),
            }
            Ok(())
        }
        ElementKind::Method | ElementKind::Field => {
            // prefer the file that declares the owner type in the target tree
            let owner = e
                .owner_type()
                .ok_or_else(|| MigrateError::UnknownElement(e.qualified_name.clone()))?;
            let target_file = find_element_file(tree, owner).unwrap_or_else(|| e.owner_file.clone());
            match tree.get(&target_file) {
                Some(content) => {
                    let updated = dsl::insert_member(&target_file, content, e)
                        .map_err(MigrateError::Edit)?;
                    tree.insert(target_file, updated);
                }
                None => tree.insert(target_file, dsl::render_new_file(e)),
            }
            Ok(())
        }
    }
}

fn overwrite_element(
    tree: &mut SourceTree,
    e: &CodeElement,
    counterpart: &str,
) -> Result<(), MigrateError> {
    let Some(path) = find_element_file(tree, counterpart) else {
        // counterpart vanished; fall back to a plain insert
        return insert_element(tree, e);
    };
    let content = tree.get(&path).unwrap_or_default().to_string();
    // the replacement keeps the migrated element's own name
    let mut replacement = e.clone();
    replacement.owner_file = path.clone();
    let updated = if counterpart == e.qualified_name {
        dsl::replace_member(&path, &content, &replacement).map_err(MigrateError::Edit)?
    } else {
        // renamed counterpart: splice over its span
        let parsed = dsl::parse_file(&path, &content)
            .map_err(|p| MigrateError::Edit(dsl::EditError::Parse(p)))?;
        let target = parsed
            .find(counterpart)
            .ok_or_else(|| MigrateError::UnknownElement(counterpart.to_string()))?;
        let mut lines: Vec<String> = content.lines().map(ToString::to_string).collect();
        lines.splice(target.start..=target.end, dsl::render_member(&replacement));
        let mut joined = lines.join("\n");
        joined.push('\n');
        joined
    };
    tree.insert(path, updated);
    Ok(())
}

// ---------------------------------------------------------------------------
// Rewrite rules
// ---------------------------------------------------------------------------

/// Library/language metadata of a revision, read by rule triggers.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvironmentMetadata {
    pub language_level: String,
    pub library_versions: BTreeMap<String, String>,
}

impl EnvironmentMetadata {
    pub fn with_language_level(level: impl Into<String>) -> Self {
        Self {
            language_level: level.into(),
            library_versions: BTreeMap::new(),
        }
    }
}

/// Compares dotted version strings segment-wise and numerically.
pub fn compare_versions(a: &str, b: &str) -> core::cmp::Ordering {
    let parse = |s: &str| -> Vec<u64> {
        s.split('.')
            .map(|seg| seg.trim().parse::<u64>().unwrap_or(0))
            .collect()
    };
    let (va, vb) = (parse(a), parse(b));
    let len = core::cmp::max(va.len(), vb.len());
    for i in 0..len {
        let x = va.get(i).copied().unwrap_or(0);
        let y = vb.get(i).copied().unwrap_or(0);
        match x.cmp(&y) {
            core::cmp::Ordering::Equal => continue,
            other => return other,
        }
    }
    core::cmp::Ordering::Equal
}

/// Which revision's environment a version predicate inspects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnvSide {
    Inv,
    Bfc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VersionOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
}

impl VersionOp {
    fn holds(self, ord: core::cmp::Ordering) -> bool {
        use core::cmp::Ordering::*;
        match self {
            VersionOp::Lt => ord == Less,
            VersionOp::Le => ord != Greater,
            VersionOp::Gt => ord == Greater,
            VersionOp::Ge => ord != Less,
            VersionOp::Eq => ord == Equal,
        }
    }
}

/// One conjunct of a rule trigger.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Predicate {
    LangLevel(EnvSide, VersionOp, String),
    HasAnnotation(String),
    /// The element's owner class implements an interface declaring a method
    /// with the element's simple name.
    ImplementsInterface,
}

/// The one declarative change a rule makes to an element.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Edit {
    RemoveAnnotation(String),
    AddModifier(String),
    RemoveModifier(String),
}

/// `RULE <name> WHEN <pred>[&<pred>]* DO <edit>`, applied to every migrated
/// element whose trigger holds. Edits are idempotent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewriteRule {
    pub name: String,
    pub trigger: Vec<Predicate>,
    pub edit: Edit,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleParseError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for RuleParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rule file line {}: {}", self.line, self.message)
    }
}

#[cfg(feature = "std")]
impl std::error::Error for RuleParseError {}

/// Parses a rule file: one `RULE` record per non-empty, non-`#` line.
pub fn parse_rules(content: &str) -> Result<Vec<RewriteRule>, RuleParseError> {
    let mut rules = Vec::new();
    for (i, raw) in content.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fail = |message: String| RuleParseError {
            line: i + 1,
            message,
        };
        let rest = line
            .strip_prefix("RULE ")
            .ok_or_else(|| fail("expected `RULE`".into()))?;
        let (name, rest) = rest
            .split_once(" WHEN ")
            .ok_or_else(|| fail("expected `WHEN`".into()))?;
        let (preds, edit) = rest
            .split_once(" DO ")
            .ok_or_else(|| fail("expected `DO`".into()))?;
        let trigger = preds
            .split('&')
            .map(|p| parse_predicate(p.trim()).ok_or_else(|| fail(alloc::format!("bad predicate `{p}`"))))
            .collect::<Result<Vec<_>, _>>()?;
        let edit = parse_edit(edit.trim()).ok_or_else(|| fail(alloc::format!("bad edit `{edit}`")))?;
        rules.push(RewriteRule {
            name: name.trim().to_string(),
            trigger,
            edit,
        });
    }
    Ok(rules)
}

fn parse_predicate(p: &str) -> Option<Predicate> {
    if p == "implements_interface" {
        return Some(Predicate::ImplementsInterface);
    }
    if let Some(arg) = p.strip_prefix("has_annotation(").and_then(|s| s.strip_suffix(')')) {
        return Some(Predicate::HasAnnotation(arg.trim().to_string()));
    }
    for side in ["inv", "bfc"] {
        let prefix = alloc::format!("lang_level({side})");
        if let Some(rest) = p.strip_prefix(prefix.as_str()) {
            let side = if side == "inv" { EnvSide::Inv } else { EnvSide::Bfc };
            let rest = rest.trim();
            let (op, version) = if let Some(v) = rest.strip_prefix(">=") {
                (VersionOp::Ge, v)
            } else if let Some(v) = rest.strip_prefix("<=") {
                (VersionOp::Le, v)
            } else if let Some(v) = rest.strip_prefix('<') {
                (VersionOp::Lt, v)
            } else if let Some(v) = rest.strip_prefix('>') {
                (VersionOp::Gt, v)
            } else {
                (VersionOp::Eq, rest.strip_prefix('=')?)
            };
            return Some(Predicate::LangLevel(side, op, version.trim().to_string()));
        }
    }
    None
}

fn parse_edit(e: &str) -> Option<Edit> {
    let inner = |prefix: &str| {
        e.strip_prefix(prefix)
            .and_then(|s| s.strip_suffix(')'))
            .map(|s| s.trim().to_string())
    };
    if let Some(a) = inner("remove_annotation(") {
        return Some(Edit::RemoveAnnotation(a));
    }
    if let Some(m) = inner("add_modifier(") {
        return Some(Edit::AddModifier(m));
    }
    if let Some(m) = inner("remove_modifier(") {
        return Some(Edit::RemoveModifier(m));
    }
    None
}

/// The rule shipped by default: drop `@Override` on interface-implementing
/// methods when the investigated revision predates annotation support.
pub const DEFAULT_RULES: &str = "RULE drop-override WHEN lang_level(inv)<1.6 & lang_level(bfc)>=1.6 & has_annotation(Override) & implements_interface DO remove_annotation(Override)\n";

fn trigger_holds(
    rule: &RewriteRule,
    element: &CodeElement,
    model: &[CodeElement],
    env_inv: &EnvironmentMetadata,
    env_bfc: &EnvironmentMetadata,
) -> bool {
    rule.trigger.iter().all(|p| match p {
        Predicate::LangLevel(side, op, version) => {
            let level = match side {
                EnvSide::Inv => &env_inv.language_level,
                EnvSide::Bfc => &env_bfc.language_level,
            };
            op.holds(compare_versions(level, version))
        }
        Predicate::HasAnnotation(a) => element.annotations.contains(a),
        Predicate::ImplementsInterface => {
            let Some(owner) = element.owner_type() else {
                return false;
            };
            let Some(class) = model.iter().find(|e| e.qualified_name == owner) else {
                return false;
            };
            class.implements.iter().any(|iface| {
                model.iter().any(|e| {
                    e.kind == ElementKind::Method
                        && e.owner_type() == Some(iface.as_str())
                        && e.simple_name == element.simple_name
                })
            })
        }
    })
}

fn apply_edit(element: &mut CodeElement, edit: &Edit) -> bool {
    match edit {
        Edit::RemoveAnnotation(a) => element.annotations.remove(a),
        Edit::AddModifier(m) => element.modifiers.insert(m.clone()),
        Edit::RemoveModifier(m) => element.modifiers.remove(m),
    }
}

/// Applies every rule whose trigger holds to every migrated element, in rule
/// order. Returns the transformed tree and the names of rules that changed
/// anything. Failures to rewrite a file are recorded and skip that rule
/// application; the overall transform is idempotent.
pub fn transform(
    tree: &SourceTree,
    migrated: &BTreeSet<String>,
    rules: &[RewriteRule],
    env_inv: &EnvironmentMetadata,
    env_bfc: &EnvironmentMetadata,
) -> (SourceTree, Vec<String>, Vec<MigrateError>) {
    let mut out = tree.clone();
    let mut applied = Vec::new();
    let mut failures = Vec::new();
    for rule in rules {
        let (model, _) = dsl::parse_revision(&out, &dsl::DslParser);
        for name in migrated {
            let Some(element) = model.iter().find(|e| &e.qualified_name == name) else {
                continue;
            };
            if !trigger_holds(rule, element, &model, env_inv, env_bfc) {
                continue;
            }
            let mut edited = element.clone();
            if !apply_edit(&mut edited, &rule.edit) {
                continue; // already in the target state
            }
            let path = edited.owner_file.clone();
            let content = out.get(&path).unwrap_or_default().to_string();
            match dsl::replace_member(&path, &content, &edited) {
                Ok(updated) => {
                    out.insert(path, updated);
                    if !applied.contains(&rule.name) {
                        applied.push(rule.name.clone());
                    }
                }
                Err(e) => failures.push(MigrateError::Edit(e)),
            }
        }
    }
    (out, applied, failures)
}

// ---------------------------------------------------------------------------
// Reconciliation
// ---------------------------------------------------------------------------

/// The four decision-tree steps, in attempt order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReconcileStep {
    MigrateMissing,
    Transform,
    MigrateChanged,
    TransformAgain,
}

/// One reconciliation attempt and the feedback its tree produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub step: ReconcileStep,
    pub feedback: Feedback,
}

/// A migrated revision on which the test resolves.
#[derive(Debug, Clone, PartialEq)]
pub struct MigratedRevision {
    pub tree: SourceTree,
    pub migrated: BTreeSet<String>,
    pub rules_applied: Vec<String>,
    pub fingerprint: u64,
    pub feedback: Feedback,
}

/// Fingerprint of a migration outcome: target revision id, sorted migrated
/// element names, applied rule names. Feeds the feedback cache key.
pub fn migration_fingerprint(
    c_inv_id: &str,
    migrated: &BTreeSet<String>,
    rules_applied: &[String],
) -> u64 {
    let mut buf = String::new();
    buf.push_str(c_inv_id);
    for m in migrated {
        buf.push('\x1f');
        buf.push_str(m);
    }
    buf.push('\x1e');
    for r in rules_applied {
        buf.push('\x1f');
        buf.push_str(r);
    }
    fnv1a64(buf.as_bytes())
}

/// Smallest subset of `e_change` (one-minimal, ties by name order) whose
/// overwrite on top of `base` lets the test resolve. `None` when even the
/// full set fails.
pub fn minimal_change_core<P>(
    e_change: &BTreeSet<String>,
    sources: &BTreeMap<String, CodeElement>,
    counterparts: &BTreeMap<String, String>,
    base: &SourceTree,
    probe: &mut P,
) -> Result<Option<(BTreeSet<String>, SourceTree, Feedback)>, ReconcileError>
where
    P: FnMut(&SourceTree) -> Result<Feedback, EvalError>,
{
    let build = |subset: &BTreeSet<String>| -> Result<SourceTree, MigrateError> {
        let elements: Vec<&CodeElement> = subset
            .iter()
            .filter_map(|n| sources.get(n))
            .collect();
        let overwrite: BTreeMap<String, String> = subset
            .iter()
            .map(|n| {
                (
                    n.clone(),
                    counterparts.get(n).cloned().unwrap_or_else(|| n.clone()),
                )
            })
            .collect();
        apply_elements(&elements, base, &overwrite)
    };

    let mut current: BTreeSet<String> = e_change.clone();
    let tree = build(&current).map_err(ReconcileError::Migrate)?;
    let mut tree_fb = probe(&tree).map_err(ReconcileError::Eval)?;
    if !tree_fb.has_feedback() {
        return Ok(None);
    }
    let mut tree_ok = tree;

    // one-minimal reduction: drop elements one at a time while the test
    // still resolves, restarting the sweep after every successful removal.
    // Sweeping in reverse name order keeps the lexicographically smallest
    // elements when several cores are viable.
    loop {
        let mut removed_any = false;
        let sweep: Vec<String> = current.iter().rev().cloned().collect();
        for name in &sweep {
            if current.len() == 1 {
                break;
            }
            let mut candidate = current.clone();
            candidate.remove(name);
            let tree = build(&candidate).map_err(ReconcileError::Migrate)?;
            let fb = probe(&tree).map_err(ReconcileError::Eval)?;
            if fb.has_feedback() {
                current = candidate;
                tree_ok = tree;
                tree_fb = fb;
                removed_any = true;
            }
        }
        if !removed_any {
            break;
        }
    }
    Ok(Some((current, tree_ok, tree_fb)))
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReconcileError {
    Migrate(MigrateError),
    Eval(EvalError),
}

impl fmt::Display for ReconcileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReconcileError::Migrate(e) => write!(f, "{e}"),
            ReconcileError::Eval(e) => write!(f, "{e}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ReconcileError {}

/// The reconciliation decision tree, in fixed order:
/// 1. migrate the missing dependencies;
/// 2. transform with the rewrite rules;
/// 3. additionally overwrite a minimal core of the changed dependencies;
/// 4. transform again.
///
/// Returns the first migrated revision on which the test resolves to
/// Pass/Fail, plus the attempt trace (a prefix of the four steps, stopping
/// at the first success).
#[allow(clippy::too_many_arguments)]
pub fn reconcile<P>(
    plan: &MigrationPlan,
    sources: &BTreeMap<String, CodeElement>,
    c_inv_id: &str,
    c_inv_tree: &SourceTree,
    rules: &[RewriteRule],
    env_inv: &EnvironmentMetadata,
    env_bfc: &EnvironmentMetadata,
    probe: &mut P,
) -> Result<(Option<MigratedRevision>, Vec<Attempt>), ReconcileError>
where
    P: FnMut(&SourceTree) -> Result<Feedback, EvalError>,
{
    let mut attempts = Vec::new();

    // step 1: copy missing dependencies only
    let missing: Vec<&CodeElement> = plan
        .e_miss
        .iter()
        .filter_map(|n| sources.get(n))
        .collect();
    let t1 = apply_elements(&missing, c_inv_tree, &BTreeMap::new())
        .map_err(ReconcileError::Migrate)?;
    let fb1 = probe(&t1).map_err(ReconcileError::Eval)?;
    attempts.push(Attempt {
        step: ReconcileStep::MigrateMissing,
        feedback: fb1.clone(),
    });
    if fb1.has_feedback() {
        let fingerprint = migration_fingerprint(c_inv_id, &plan.e_miss, &[]);
        return Ok((
            Some(MigratedRevision {
                tree: t1,
                migrated: plan.e_miss.clone(),
                rules_applied: Vec::new(),
                fingerprint,
                feedback: fb1,
            }),
            attempts,
        ));
    }

    // step 2: rewrite the migrated elements for the older environment
    let (t2, rules_applied, _failures) = transform(&t1, &plan.e_miss, rules, env_inv, env_bfc);
    let fb2 = probe(&t2).map_err(ReconcileError::Eval)?;
    attempts.push(Attempt {
        step: ReconcileStep::Transform,
        feedback: fb2.clone(),
    });
    if fb2.has_feedback() {
        let fingerprint = migration_fingerprint(c_inv_id, &plan.e_miss, &rules_applied);
        return Ok((
            Some(MigratedRevision {
                tree: t2,
                migrated: plan.e_miss.clone(),
                rules_applied,
                fingerprint,
                feedback: fb2,
            }),
            attempts,
        ));
    }

    // step 3: overwrite a minimal core of the changed dependencies
    let core = if plan.e_change.is_empty() {
        None
    } else {
        minimal_change_core(&plan.e_change, sources, &plan.counterparts, &t2, probe)?
    };
    let (t3, migrated3, fb3) = match core {
        Some((subset, tree, fb)) => {
            let migrated: BTreeSet<String> = plan.e_miss.union(&subset).cloned().collect();
            (tree, migrated, fb)
        }
        None => {
            // keep the full overwrite applied so the final transform gets a
            // chance to repair it
            let elements: Vec<&CodeElement> = plan
                .e_change
                .iter()
                .filter_map(|n| sources.get(n))
                .collect();
            let overwrite: BTreeMap<String, String> = plan
                .e_change
                .iter()
                .map(|n| {
                    (
                        n.clone(),
                        plan.counterparts.get(n).cloned().unwrap_or_else(|| n.clone()),
                    )
                })
                .collect();
            let tree = apply_elements(&elements, &t2, &overwrite)
                .map_err(ReconcileError::Migrate)?;
            let fb = probe(&tree).map_err(ReconcileError::Eval)?;
            let migrated: BTreeSet<String> =
                plan.e_miss.union(&plan.e_change).cloned().collect();
            (tree, migrated, fb)
        }
    };
    attempts.push(Attempt {
        step: ReconcileStep::MigrateChanged,
        feedback: fb3.clone(),
    });
    if fb3.has_feedback() {
        let fingerprint = migration_fingerprint(c_inv_id, &migrated3, &rules_applied);
        return Ok((
            Some(MigratedRevision {
                tree: t3,
                migrated: migrated3,
                rules_applied,
                fingerprint,
                feedback: fb3,
            }),
            attempts,
        ));
    }

    // step 4: transform once more, now covering the overwritten elements
    let (t4, mut rules4, _failures) = transform(&t3, &migrated3, rules, env_inv, env_bfc);
    for r in rules_applied {
        if !rules4.contains(&r) {
            rules4.push(r);
        }
    }
    let fb4 = probe(&t4).map_err(ReconcileError::Eval)?;
    attempts.push(Attempt {
        step: ReconcileStep::TransformAgain,
        feedback: fb4.clone(),
    });
    if fb4.has_feedback() {
        let fingerprint = migration_fingerprint(c_inv_id, &migrated3, &rules4);
        return Ok((
            Some(MigratedRevision {
                tree: t4,
                migrated: migrated3,
                rules_applied: rules4,
                fingerprint,
                feedback: fb4,
            }),
            attempts,
        ));
    }
    Ok((None, attempts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::history::NoFeedbackReason;
    use alloc::vec::Vec;

    #[test]
    fn applying_nothing_leaves_the_tree_byte_identical() {
        let mut tree = SourceTree::new();
        tree.insert("a.dsl", "class A {\n  method m() {\n    line x\n  }\n}\n");
        tree.insert("notes.txt", "free-form\n");
        let out = apply_elements(&[], &tree, &BTreeMap::new()).unwrap();
        assert_eq!(out, tree);
    }

    fn field_source(name: &str, marker: &str) -> CodeElement {
        let mut e = CodeElement::new(ElementKind::Field, alloc::format!("C.{name}"));
        e.body = alloc::format!("line {marker}");
        e.owner_file = "c.dsl".into();
        e
    }

    /// Drives minimal_change_core with a probe that declares which subsets
    /// satisfy the condition, by checking which markers made it into the
    /// tree.
    fn run_core(
        required: &[&str],
        change: &[&str],
    ) -> Option<BTreeSet<String>> {
        let mut base = SourceTree::new();
        let mut class = String::from("class C {\n");
        for name in change {
            class.push_str(&alloc::format!("  field {name} {{\n    line old\n  }}\n"));
        }
        class.push_str("}\n");
        base.insert("c.dsl", class);

        let sources: BTreeMap<String, CodeElement> = change
            .iter()
            .map(|n| (alloc::format!("C.{n}"), field_source(n, &alloc::format!("new {n}"))))
            .collect();
        let counterparts: BTreeMap<String, String> = change
            .iter()
            .map(|n| (alloc::format!("C.{n}"), alloc::format!("C.{n}")))
            .collect();
        let e_change: BTreeSet<String> =
            change.iter().map(|n| alloc::format!("C.{n}")).collect();
        let required: Vec<String> =
            required.iter().map(|n| alloc::format!("new {n}")).collect();

        let mut probe = |tree: &SourceTree| {
            let content = tree.get("c.dsl").unwrap_or_default();
            if required.iter().all(|marker| content.contains(marker.as_str())) {
                Ok(Feedback::Pass)
            } else {
                Ok(Feedback::NoFeedback(NoFeedbackReason::CompileError))
            }
        };
        minimal_change_core(&e_change, &sources, &counterparts, &base, &mut probe)
            .unwrap()
            .map(|(subset, _, _)| subset)
    }

    #[test]
    fn minimal_core_finds_the_singleton() {
        let subset = run_core(&["a"], &["a", "b", "c"]).unwrap();
        assert_eq!(subset, BTreeSet::from(["C.a".to_string()]));
    }

    #[test]
    fn minimal_core_keeps_a_required_pair() {
        let subset = run_core(&["a", "c"], &["a", "b", "c"]).unwrap();
        assert_eq!(
            subset,
            BTreeSet::from(["C.a".to_string(), "C.c".to_string()]),
            "one-minimal: neither element of the pair can be dropped"
        );
    }

    #[test]
    fn minimal_core_returns_none_when_even_everything_fails() {
        assert!(run_core(&["not-migratable"], &["a", "b"]).is_none());
    }

    #[test]
    fn rule_file_round_trip() {
        let rules = parse_rules(DEFAULT_RULES).unwrap();
        assert_eq!(rules.len(), 1);
        assert_eq!(rules[0].name, "drop-override");
        assert_eq!(rules[0].trigger.len(), 4);
        assert_eq!(rules[0].edit, Edit::RemoveAnnotation("Override".into()));
        assert!(parse_rules("RULE broken WHEN nonsense DO nothing").is_err());
        let custom = parse_rules(
            "# comment\nRULE statics WHEN lang_level(bfc)>=1.7 & has_annotation(Memo) DO add_modifier(static)\n",
        )
        .unwrap();
        assert_eq!(custom[0].edit, Edit::AddModifier("static".into()));
    }

    #[test]
    fn version_comparison_is_segmentwise() {
        use core::cmp::Ordering::*;
        assert_eq!(compare_versions("1.5", "1.6"), Less);
        assert_eq!(compare_versions("1.10", "1.9"), Greater);
        assert_eq!(compare_versions("1.7", "1.7.0"), Equal);
    }
}
