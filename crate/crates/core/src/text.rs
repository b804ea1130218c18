//! Sequence and token utilities shared by the similarity metrics.

use alloc::string::String;
use alloc::vec::Vec;

/// Length of the longest common subsequence of two slices.
///
/// Classic DP over a rolling row; O(|a|·|b|) time, O(|b|) space. Inputs at
/// the scale of method names and hunk bodies, so quadratic cost is fine.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = alloc::vec![0usize; b.len() + 1];
    let mut cur = alloc::vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                core::cmp::max(prev[j + 1], cur[j])
            };
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `|LCS(a, b)| / max(|a|, |b|)` over characters; 1.0 when both are empty.
pub fn lcs_ratio_chars(a: &str, b: &str) -> f64 {
    let av: Vec<char> = a.chars().collect();
    let bv: Vec<char> = b.chars().collect();
    lcs_ratio(&av, &bv)
}

/// `|LCS(a, b)| / max(|a|, |b|)` over arbitrary items; 1.0 when both are empty.
pub fn lcs_ratio<T: PartialEq>(a: &[T], b: &[T]) -> f64 {
    let denom = core::cmp::max(a.len(), b.len());
    if denom == 0 {
        return 1.0;
    }
    lcs_len(a, b) as f64 / denom as f64
}

/// Splits an identifier into lowercase word tokens.
///
/// Boundaries are underscores, non-alphanumeric characters, lower→upper
/// transitions, and the end of an acronym run (`HTTPHeader` → `http`,
/// `header`). Digit runs form their own tokens.
pub fn split_identifier(name: &str) -> Vec<String> {
    let chars: Vec<char> = name.chars().collect();
    let mut tokens = Vec::new();
    let mut cur = String::new();
    for i in 0..chars.len() {
        let c = chars[i];
        if !c.is_alphanumeric() {
            flush(&mut tokens, &mut cur);
            continue;
        }
        let boundary = if cur.is_empty() {
            false
        } else if c.is_uppercase() {
            let prev = chars[i - 1];
            // lower→upper, digit→upper, or last capital of an acronym run
            !prev.is_uppercase()
                || chars
                    .get(i + 1)
                    .map(|n| n.is_lowercase())
                    .unwrap_or(false)
        } else if c.is_ascii_digit() {
            !chars[i - 1].is_ascii_digit()
        } else {
            chars[i - 1].is_ascii_digit()
        };
        if boundary {
            flush(&mut tokens, &mut cur);
        }
        cur.extend(c.to_lowercase());
    }
    flush(&mut tokens, &mut cur);
    tokens
}

fn flush(tokens: &mut Vec<String>, cur: &mut String) {
    if !cur.is_empty() {
        tokens.push(core::mem::take(cur));
    }
}

/// Whitespace-token stream of a code body, for token-level LCS.
pub fn body_tokens(body: &str) -> Vec<&str> {
    body.split_whitespace().collect()
}

/// Collapses all whitespace runs to single spaces and trims the ends.
pub fn normalize_code(code: &str) -> String {
    let mut out = String::with_capacity(code.len());
    let mut in_ws = true;
    for c in code.chars() {
        if c.is_whitespace() {
            if !in_ws {
                out.push(' ');
                in_ws = true;
            }
        } else {
            out.push(c);
            in_ws = false;
        }
    }
    if out.ends_with(' ') {
        out.pop();
    }
    out
}

/// 64-bit FNV-1a, used for in-memory fingerprints (stable across runs).
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
