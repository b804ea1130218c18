//! Line diffs between file versions, grouped into hunks.
//!
//! A hunk is the atom of semantic labeling and revert analysis: a contiguous
//! run of added and deleted lines, optionally attributed to the method whose
//! span contains it.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};


use crate::tree::SourceTree;

/// One diff line with its 1-based position (in the old file for deletions,
/// the new file for additions).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffLine {
    pub line: u32,
    pub content: String,
}

/// A contiguous run of added and deleted lines within one file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Hunk {
    pub file: String,
    pub add: Vec<DiffLine>,
    pub del: Vec<DiffLine>,
    /// Qualified name of the method the hunk falls in, when resolvable.
    pub owner_method: Option<String>,
    /// Relative (start, end) fractions of the hunk within the owner method:
    /// post-change coordinates for additions, pre-change for deletions.
    pub relative_span: Option<(f64, f64)>,
}

impl Hunk {
    pub fn added_text(&self) -> String {
        join_lines(&self.add)
    }

    pub fn deleted_text(&self) -> String {
        join_lines(&self.del)
    }

    pub fn is_empty(&self) -> bool {
        self.add.is_empty() && self.del.is_empty()
    }
}

fn join_lines(lines: &[DiffLine]) -> String {
    let mut out = String::new();
    for (i, l) in lines.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&l.content);
    }
    out
}

/// All hunks of one file between two revisions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDiff {
    pub file: String,
    pub hunks: Vec<Hunk>,
    pub old_existed: bool,
    pub new_existed: bool,
}

impl FileDiff {
    pub fn is_new_file(&self) -> bool {
        !self.old_existed && self.new_existed
    }
}

/// Diffs two file contents into hunks with 1-based positions.
pub fn diff_lines(file: &str, old: &str, new: &str) -> Vec<Hunk> {
    let old_lines: Vec<&str> = if old.is_empty() { Vec::new() } else { old.lines().collect() };
    let new_lines: Vec<&str> = if new.is_empty() { Vec::new() } else { new.lines().collect() };
    let keep = lcs_pairs(&old_lines, &new_lines);

    let mut hunks = Vec::new();
    let mut cur = Hunk {
        file: file.to_string(),
        ..Hunk::default()
    };
    let (mut i, mut j) = (0usize, 0usize);
    for &(ki, kj) in keep.iter().chain(core::iter::once(&(old_lines.len(), new_lines.len()))) {
        while i < ki {
            cur.del.push(DiffLine {
                line: (i + 1) as u32,
                content: old_lines[i].to_string(),
            });
            i += 1;
        }
        while j < kj {
            cur.add.push(DiffLine {
                line: (j + 1) as u32,
                content: new_lines[j].to_string(),
            });
            j += 1;
        }
        if !cur.is_empty() {
            hunks.push(core::mem::replace(
                &mut cur,
                Hunk {
                    file: file.to_string(),
                    ..Hunk::default()
                },
            ));
        }
        // skip the matched line itself
        i = ki.saturating_add(1).min(old_lines.len());
        j = kj.saturating_add(1).min(new_lines.len());
    }
    hunks
}

/// Diffs two trees file by file.
pub fn diff_trees(old: &SourceTree, new: &SourceTree) -> Vec<FileDiff> {
    let mut files: Vec<&str> = old.paths().chain(new.paths()).collect();
    files.sort_unstable();
    files.dedup();

    let mut out = Vec::new();
    for file in files {
        let o = old.get(file);
        let n = new.get(file);
        if o == n {
            continue;
        }
        let hunks = diff_lines(file, o.unwrap_or(""), n.unwrap_or(""));
        if !hunks.is_empty() {
            out.push(FileDiff {
                file: file.to_string(),
                hunks,
                old_existed: o.is_some(),
                new_existed: n.is_some(),
            });
        }
    }
    out
}

/// Indices of one LCS matching between two line slices, in order.
fn lcs_pairs(a: &[&str], b: &[&str]) -> Vec<(usize, usize)> {
    // Full DP table; trees in this crate hold short files.
    let n = a.len();
    let m = b.len();
    let mut table = alloc::vec![0u32; (n + 1) * (m + 1)];
    let idx = |i: usize, j: usize| i * (m + 1) + j;
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            table[idx(i, j)] = if a[i] == b[j] {
                table[idx(i + 1, j + 1)] + 1
            } else {
                core::cmp::max(table[idx(i + 1, j)], table[idx(i, j + 1)])
            };
        }
    }
    let mut pairs = Vec::with_capacity(table[0] as usize);
    let (mut i, mut j) = (0usize, 0usize);
    while i < n && j < m {
        if a[i] == b[j] {
            pairs.push((i, j));
            i += 1;
            j += 1;
        } else if table[idx(i + 1, j)] >= table[idx(i, j + 1)] {
            i += 1;
        } else {
            j += 1;
        }
    }
    pairs
}
