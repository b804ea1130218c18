//! Dataset-quality metrics: feature coverage similarity and distribution
//! entropy.

use std::collections::{BTreeMap, BTreeSet};

use regress_core::model::{align_revisions, CodeElement, SimilarityWeights};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("empty distribution has no entropy")]
pub struct EmptyDistribution;

/// Shannon entropy (bits) of a count distribution; zero-count categories are
/// ignored.
pub fn diversity_entropy(counts: &BTreeMap<String, u64>) -> Result<f64, EmptyDistribution> {
    let total: u64 = counts.values().sum();
    if total == 0 {
        return Err(EmptyDistribution);
    }
    let mut h = 0.0;
    for &n in counts.values() {
        if n == 0 {
            continue;
        }
        let p = n as f64 / total as f64;
        h -= p * p.log2();
    }
    Ok(h)
}

/// `|A ∩ B| / min(|A|, |B|)` over element names; 0 when either side is
/// empty.
pub fn coverage_similarity_sets(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let min = a.len().min(b.len());
    if min == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / min as f64
}

/// Coverage similarity across two revisions' models: coverage names on the
/// fixing side are mapped through the cross-revision alignment before
/// intersecting, so renamed elements still count as shared.
pub fn feature_coverage_similarity(
    cov_rfc: &BTreeSet<String>,
    cov_ric: &BTreeSet<String>,
    model_rfc: &[CodeElement],
    model_ric: &[CodeElement],
    w: &SimilarityWeights,
) -> f64 {
    let min = cov_rfc.len().min(cov_ric.len());
    if min == 0 {
        return 0.0;
    }
    let alignment = align_revisions(model_rfc, model_ric, w);
    let shared = cov_rfc
        .iter()
        .filter(|name| {
            alignment
                .counterpart_of(name)
                .map(|c| cov_ric.contains(c))
                .unwrap_or(false)
        })
        .count();
    shared as f64 / min as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(pairs: &[(&str, u64)]) -> BTreeMap<String, u64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn entropy_values() {
        let uniform4 = counts(&[("a", 5), ("b", 5), ("c", 5), ("d", 5)]);
        assert_eq!(diversity_entropy(&uniform4).unwrap(), 2.0);
        let single = counts(&[("a", 17)]);
        assert_eq!(diversity_entropy(&single).unwrap(), 0.0);
        let skewed = counts(&[("a", 3), ("b", 1)]);
        let h = diversity_entropy(&skewed).unwrap();
        assert!((h - 0.8113).abs() < 1e-4);
        assert_eq!(diversity_entropy(&BTreeMap::new()), Err(EmptyDistribution));
        // zero-count categories are ignored
        let padded = counts(&[("a", 3), ("b", 1), ("zero", 0)]);
        assert_eq!(diversity_entropy(&padded).unwrap(), h);
    }

    #[test]
    fn coverage_similarity_examples() {
        let s = |names: &[&str]| -> BTreeSet<String> {
            names.iter().map(|n| n.to_string()).collect()
        };
        let a = s(&["a", "b", "c", "d"]);
        assert_eq!(coverage_similarity_sets(&a, &a.clone()), 1.0);
        assert_eq!(coverage_similarity_sets(&a, &s(&["x", "y"])), 0.0);
        let sim = coverage_similarity_sets(&a, &s(&["b", "c", "e"]));
        assert!((sim - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(coverage_similarity_sets(&a, &BTreeSet::new()), 0.0);
    }
}
