//! Structural model of code elements and cross-revision matching.
//!
//! Elements are classes, interfaces, methods, and fields. Matching works in
//! two stages: exact signature matches first, then greedy pairing by a
//! weighted signature/body similarity. The greedy alignment stands in for a
//! full structural-diff algorithm behind the same interface; it is
//! deterministic and O(n²) in the number of unmatched elements.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use serde::{Deserialize, Serialize};

use crate::text::{body_tokens, lcs_ratio, lcs_ratio_chars, split_identifier};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ElementKind {
    Class,
    Interface,
    Method,
    Field,
}

impl fmt::Display for ElementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ElementKind::Class => "CLASS",
            ElementKind::Interface => "INTERFACE",
            ElementKind::Method => "METHOD",
            ElementKind::Field => "FIELD",
        })
    }
}

/// One class, interface, method, or field in a revision's model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeElement {
    pub kind: ElementKind,
    /// Unique within one revision, e.g. `FastDatePrinter.format`.
    pub qualified_name: String,
    pub simple_name: String,
    pub return_type: Option<String>,
    /// Empty unless `kind == Method`.
    pub param_types: Vec<String>,
    pub body: String,
    /// Qualified names this element calls or reads.
    pub references: BTreeSet<String>,
    pub annotations: BTreeSet<String>,
    pub modifiers: BTreeSet<String>,
    /// Interfaces a class declares; empty for other kinds.
    pub implements: BTreeSet<String>,
    pub owner_file: String,
}

impl CodeElement {
    pub fn new(kind: ElementKind, qualified_name: impl Into<String>) -> Self {
        let qualified_name = qualified_name.into();
        let simple_name = qualified_name
            .rsplit('.')
            .next()
            .unwrap_or(&qualified_name)
            .to_string();
        Self {
            kind,
            qualified_name,
            simple_name,
            return_type: None,
            param_types: Vec::new(),
            body: String::new(),
            references: BTreeSet::new(),
            annotations: BTreeSet::new(),
            modifiers: BTreeSet::new(),
            implements: BTreeSet::new(),
            owner_file: String::new(),
        }
    }

    /// Qualified name of the declaring class/interface, if any.
    pub fn owner_type(&self) -> Option<&str> {
        match self.kind {
            ElementKind::Method | ElementKind::Field => {
                self.qualified_name.rsplit_once('.').map(|(owner, _)| owner)
            }
            _ => None,
        }
    }

    /// Same declared signature: qualified name, and for methods also the
    /// parameter and return types.
    pub fn same_signature(&self, other: &CodeElement) -> bool {
        self.kind == other.kind
            && self.qualified_name == other.qualified_name
            && (self.kind != ElementKind::Method
                || (self.param_types == other.param_types && self.return_type == other.return_type))
    }

    /// Full content equality, ignoring only the owning file.
    pub fn same_content(&self, other: &CodeElement) -> bool {
        self.same_signature(other)
            && self.body == other.body
            && self.annotations == other.annotations
            && self.modifiers == other.modifiers
            && self.implements == other.implements
            && self.references == other.references
    }
}

/// Heuristic test detection: a leading or trailing `test` token in the
/// simple name, or a location under one of the configured test paths.
pub fn is_test_element(element: &CodeElement, test_paths: &[String]) -> bool {
    let tokens = split_identifier(&element.simple_name);
    let named_test = tokens.first().map(String::as_str) == Some("test")
        || tokens.last().map(String::as_str) == Some("test");
    named_test || test_paths.iter().any(|p| element.owner_file.starts_with(p.as_str()))
}

/// Weights for the combined signature/body similarity and the match gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityWeights {
    pub alpha: f64,
    pub beta: f64,
    pub th_m: f64,
}

impl SimilarityWeights {
    pub fn new(alpha: f64, beta: f64, th_m: f64) -> Self {
        debug_assert!(alpha >= 0.0 && beta >= 0.0);
        debug_assert!((alpha + beta - 1.0).abs() < 1e-9);
        Self { alpha, beta, th_m }
    }
}

impl Default for SimilarityWeights {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 0.5,
            th_m: 0.8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelError {
    KindMismatch,
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::KindMismatch => f.write_str("elements have different kinds"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ModelError {}

/// `|LCS| / max(|a|, |b|)` over characters; 1.0 when both names are empty.
pub fn name_lcs_ratio(a: &str, b: &str) -> f64 {
    lcs_ratio_chars(a, b)
}

/// Mean of name LCS ratio, return-type equality, and the Jaccard
/// coefficient of the parameter type sets. Methods only.
pub fn signature_similarity(m: &CodeElement, m2: &CodeElement) -> Result<f64, ModelError> {
    if m.kind != ElementKind::Method || m2.kind != ElementKind::Method {
        return Err(ModelError::KindMismatch);
    }
    let name = name_lcs_ratio(&m.simple_name, &m2.simple_name);
    let ret = if m.return_type == m2.return_type { 1.0 } else { 0.0 };
    let params = jaccard(&m.param_types, &m2.param_types);
    Ok((name + ret + params) / 3.0)
}

fn jaccard(a: &[String], b: &[String]) -> f64 {
    let sa: BTreeSet<&str> = a.iter().map(String::as_str).collect();
    let sb: BTreeSet<&str> = b.iter().map(String::as_str).collect();
    let union = sa.union(&sb).count();
    if union == 0 {
        return 1.0;
    }
    sa.intersection(&sb).count() as f64 / union as f64
}

/// Weighted combination of signature similarity and body similarity, where
/// body similarity is the LCS ratio over the bodies' token streams. For
/// classes, interfaces, and fields the signature component is the name LCS
/// ratio.
pub fn element_similarity(
    m: &CodeElement,
    m2: &CodeElement,
    w: &SimilarityWeights,
) -> Result<f64, ModelError> {
    if m.kind != m2.kind {
        return Err(ModelError::KindMismatch);
    }
    let sig = if m.kind == ElementKind::Method {
        signature_similarity(m, m2)?
    } else {
        name_lcs_ratio(&m.simple_name, &m2.simple_name)
    };
    let body = lcs_ratio(&body_tokens(&m.body), &body_tokens(&m2.body));
    Ok(w.alpha * sig + w.beta * body)
}

/// Finds the counterpart of `m` in another revision's element set.
///
/// An exact signature match wins outright; otherwise the highest-similarity
/// candidate at or above `th_m` is taken, ties broken by lexicographically
/// smallest qualified name. Candidate order never affects the result.
pub fn reidentify<'a>(
    m: &CodeElement,
    target: impl IntoIterator<Item = &'a CodeElement>,
    w: &SimilarityWeights,
) -> Option<&'a CodeElement> {
    let mut candidates: Vec<&CodeElement> = target.into_iter().collect();
    candidates.sort_by(|x, y| x.qualified_name.cmp(&y.qualified_name));
    if let Some(exact) = candidates.iter().find(|c| c.same_signature(m)) {
        return Some(exact);
    }
    let mut best: Option<(&CodeElement, f64)> = None;
    for c in candidates {
        let Ok(sim) = element_similarity(m, c, w) else {
            continue;
        };
        if sim >= w.th_m && best.map(|(_, s)| sim > s).unwrap_or(true) {
            best = Some((c, sim));
        }
    }
    best.map(|(c, _)| c)
}

/// How the elements of two revisions pair up.
///
/// Pairs are `(a-side qualified name, b-side qualified name)`. The four
/// buckets partition both element sets.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alignment {
    pub identical: Vec<(String, String)>,
    pub modified: Vec<(String, String)>,
    pub only_in_a: BTreeSet<String>,
    pub only_in_b: BTreeSet<String>,
}

impl Alignment {
    pub fn identical_in_a(&self) -> BTreeSet<&str> {
        self.identical.iter().map(|(a, _)| a.as_str()).collect()
    }

    pub fn modified_in_a(&self) -> BTreeSet<&str> {
        self.modified.iter().map(|(a, _)| a.as_str()).collect()
    }

    /// The b-side counterpart of an a-side element, across both pair kinds.
    pub fn counterpart_of(&self, a_qualified: &str) -> Option<&str> {
        self.identical
            .iter()
            .chain(self.modified.iter())
            .find(|(a, _)| a == a_qualified)
            .map(|(_, b)| b.as_str())
    }
}

/// Greedy cross-revision alignment: exact matches first, then descending
/// similarity above `th_m`. Matched pairs with byte-identical content go to
/// `identical`, the rest of the matches to `modified`.
pub fn align_revisions(a: &[CodeElement], b: &[CodeElement], w: &SimilarityWeights) -> Alignment {
    let mut out = Alignment::default();
    let mut used_b = alloc::vec![false; b.len()];
    let mut used_a = alloc::vec![false; a.len()];

    // exact-signature pass, cheap and covers the common unchanged case
    for (i, ea) in a.iter().enumerate() {
        if let Some(j) = b
            .iter()
            .enumerate()
            .position(|(j, eb)| !used_b[j] && eb.same_signature(ea))
        {
            used_a[i] = true;
            used_b[j] = true;
            let pair = (ea.qualified_name.clone(), b[j].qualified_name.clone());
            if ea.same_content(&b[j]) {
                out.identical.push(pair);
            } else {
                out.modified.push(pair);
            }
        }
    }

    // greedy similarity pass over the leftovers
    let mut scored: Vec<(f64, usize, usize)> = Vec::new();
    for (i, ea) in a.iter().enumerate() {
        if used_a[i] {
            continue;
        }
        for (j, eb) in b.iter().enumerate() {
            if used_b[j] || eb.kind != ea.kind {
                continue;
            }
            if let Ok(sim) = element_similarity(ea, eb, w) {
                if sim >= w.th_m {
                    scored.push((sim, i, j));
                }
            }
        }
    }
    scored.sort_by(|x, y| {
        y.0.partial_cmp(&x.0)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then_with(|| a[x.1].qualified_name.cmp(&a[y.1].qualified_name))
            .then_with(|| b[x.2].qualified_name.cmp(&b[y.2].qualified_name))
    });
    for (_, i, j) in scored {
        if used_a[i] || used_b[j] {
            continue;
        }
        used_a[i] = true;
        used_b[j] = true;
        let pair = (a[i].qualified_name.clone(), b[j].qualified_name.clone());
        if a[i].same_content(&b[j]) {
            out.identical.push(pair);
        } else {
            out.modified.push(pair);
        }
    }

    for (i, ea) in a.iter().enumerate() {
        if !used_a[i] {
            out.only_in_a.insert(ea.qualified_name.clone());
        }
    }
    for (j, eb) in b.iter().enumerate() {
        if !used_b[j] {
            out.only_in_b.insert(eb.qualified_name.clone());
        }
    }
    out
}
