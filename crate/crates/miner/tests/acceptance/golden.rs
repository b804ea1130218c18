//! Twelve hand-constructed diffs with hand-applied labeling rules.
//!
//! Expected values were derived on paper from the rules before running the
//! implementation: thresholds th_len_r=5, th_sim=0.8, th_r=3, th_len_f=10,
//! th_ar=15, ε=1. The similarity measure is 2·LCS/min over normalized
//! characters (clamped), which is permissive, so "dissimilar" fixtures
//! therefore use nearly disjoint character sets.

use regress_core::diff::{DiffLine, Hunk};
use regress_core::semantics::{
    fix_distance, is_revert_fix, label_commit, ByName, LabelThresholds, SemanticLabels,
};

fn hunk(file: &str, add: &[&str], del: &[&str]) -> Hunk {
    Hunk {
        file: file.into(),
        add: add
            .iter()
            .enumerate()
            .map(|(i, c)| DiffLine {
                line: i as u32 + 1,
                content: c.to_string(),
            })
            .collect(),
        del: del
            .iter()
            .enumerate()
            .map(|(i, c)| DiffLine {
                line: i as u32 + 1,
                content: c.to_string(),
            })
            .collect(),
        owner_method: None,
        relative_span: None,
    }
}

fn owned(mut h: Hunk, method: &str, span: (f64, f64)) -> Hunk {
    h.owner_method = Some(method.into());
    h.relative_span = Some(span);
    h
}

fn labels(r: bool, f: bool, b: bool) -> SemanticLabels {
    SemanticLabels::derive(r, f, b)
}

struct LabelCase {
    name: &'static str,
    hunks: Vec<Hunk>,
    message: &'static str,
    expected: SemanticLabels,
}

struct PairCase {
    name: &'static str,
    fix: Vec<Hunk>,
    inducing: Vec<Hunk>,
    expected_revert: bool,
    expected_level: u8,
}

/// Runs all twelve scenarios, returning a description of every mismatch.
pub fn run_all() -> Vec<String> {
    let th = LabelThresholds::default();
    let mut failures = Vec::new();

    let moved6: Vec<&str> = vec![
        "shift the lookup",
        "guard the entry",
        "refresh expiry",
        "drop stale keys",
        "rebuild index",
        "emit metrics",
    ];
    let moved4: Vec<&str> = moved6[..4].to_vec();
    let add12: Vec<&str> = (0..12)
        .map(|_| "fresh feature logic line")
        .collect();
    // deletions with a character set nearly disjoint from `block_nkw`
    // additions, so nothing accidentally counts as moved code
    let block_nkw: Vec<&str> = (0..10).map(|_| "nnn kkk www nk").collect();

    // 1. a six-line block moves between hunks → refactoring only
    // (similarity of identical text = 1 ≥ 0.8; 6 ≥ th_len_r)
    let cases = vec![
        LabelCase {
            name: " 1 six-line move",
            hunks: vec![hunk("a", &moved6, &[]), hunk("b", &[], &moved6)],
            message: "reorganize cache module",
            expected: labels(true, false, false),
        },
        // 2. the same move at four lines misses th_len_r → unknown
        LabelCase {
            name: " 2 four-line move below threshold",
            hunks: vec![hunk("a", &moved4, &[]), hunk("b", &[], &moved4)],
            message: "reorganize cache module",
            expected: labels(false, false, false),
        },
        // 3. twelve added lines, nothing deleted → feature enhancement
        // (condition 1: del = 0, add 12 > 10, no matching deletion)
        LabelCase {
            name: " 3 pure twelve-line addition",
            hunks: vec![hunk("a", &add12, &[])],
            message: "introduce pagination",
            expected: labels(false, true, false),
        },
        // 4. a twelve-line addition duplicating another hunk's deletion is
        // moved code: refactoring yes, enhancement vetoed by clause (1c)
        LabelCase {
            name: " 4 twelve-line move is not enhancement",
            hunks: vec![hunk("a", &add12, &[]), hunk("b", &[], &add12)],
            message: "relocate pagination",
            expected: labels(true, false, false),
        },
        // 5. Σadd = 50 over five hunks against Σdel = 2: 50/(2+1) > 15 and
        // no single hunk exceeds th_len_f → condition 2 fires
        LabelCase {
            name: " 5 accumulated additions dominate",
            hunks: vec![
                hunk("a", &block_nkw, &["old stuff of course"]),
                hunk("b", &block_nkw, &["more old stuff"]),
                hunk("c", &block_nkw, &[]),
                hunk("d", &block_nkw, &[]),
                hunk("e", &block_nkw, &[]),
            ],
            message: "grow the module",
            expected: labels(false, true, false),
        },
        // 6. Σadd = 40 against Σdel = 2: 40/3 < 15 → nothing fires
        LabelCase {
            name: " 6 accumulated additions below ratio",
            hunks: vec![
                hunk("a", &block_nkw, &["old stuff of course"]),
                hunk("b", &block_nkw, &["more old stuff"]),
                hunk("c", &block_nkw, &[]),
                hunk("d", &block_nkw, &[]),
            ],
            message: "grow the module",
            expected: labels(false, false, false),
        },
        // 7. keyword fix in the message
        LabelCase {
            name: " 7 fix keyword",
            hunks: vec![hunk("a", &["qq ww"], &["nn kk"])],
            message: "Fix NPE in parser",
            expected: labels(false, false, true),
        },
        // 8. the substring rule applied literally: "debug" contains "bug"
        LabelCase {
            name: " 8 debug substring counts as bug fixing",
            hunks: vec![hunk("a", &["qq ww"], &[])],
            message: "debug logging added",
            expected: labels(false, false, true),
        },
        // 9. a refactor-worded message alone labels nothing
        LabelCase {
            name: " 9 message words alone do not label",
            hunks: vec![hunk("a", &["qq ww"], &["nn kk"])],
            message: "Refactor module layout",
            expected: labels(false, false, false),
        },
    ];

    for case in &cases {
        let got = label_commit(&case.hunks, case.message, &th);
        if got != case.expected {
            failures.push(format!(
                "{}: expected {:?}, got {:?}",
                case.name, case.expected, got
            ));
        }
    }

    // 10. the fix re-adds exactly what the inducing commit deleted at the
    // same spot → revert, distance 0
    let reid = ByName;
    let pairs = vec![
        PairCase {
            name: "10 pure revert",
            fix: vec![owned(
                hunk("f", &["guard the cache lookup"], &["bypass the cache wholesale"]),
                "C.m",
                (0.2, 0.4),
            )],
            inducing: vec![owned(
                hunk("f", &["bypass the cache wholesale"], &["guard the cache lookup"]),
                "C.m",
                (0.25, 0.45),
            )],
            expected_revert: true,
            expected_level: 0,
        },
        // 11. same method but disjoint spans and unrelated text → no
        // revert, distance 1
        PairCase {
            name: "11 same method, disjoint span",
            fix: vec![owned(hunk("f", &["qq ww qq"], &[]), "C.m", (0.0, 0.2))],
            inducing: vec![owned(hunk("f", &["nn kk nn"], &[]), "C.m", (0.6, 0.9))],
            expected_revert: false,
            expected_level: 1,
        },
        // 12. methods do not re-identify but the file does → distance 2
        PairCase {
            name: "12 same file, different method",
            fix: vec![owned(hunk("f", &["qq ww qq"], &[]), "C.m", (0.1, 0.3))],
            inducing: vec![owned(hunk("f", &["nn kk nn"], &[]), "C.other", (0.1, 0.3))],
            expected_revert: false,
            expected_level: 2,
        },
    ];
    for case in &pairs {
        let revert = is_revert_fix(&case.fix, &case.inducing, &th, &reid);
        if revert != case.expected_revert {
            failures.push(format!(
                "{}: expected revert {}, got {}",
                case.name, case.expected_revert, revert
            ));
        }
        let level = fix_distance(&case.fix, &case.inducing, &reid);
        if level != case.expected_level {
            failures.push(format!(
                "{}: expected level {}, got {}",
                case.name, case.expected_level, level
            ));
        }
    }

    // scenario 12 extended: a pair in unrelated files sits at level 3
    let far_fix = vec![owned(hunk("a", &["qq ww"], &[]), "A.m", (0.1, 0.2))];
    let far_inducing = vec![owned(hunk("b", &["nn kk"], &[]), "B.n", (0.1, 0.2))];
    if fix_distance(&far_fix, &far_inducing, &reid) != 3 {
        failures.push("12b: unrelated files must sit at level 3".into());
    }

    failures
}
