//! Longest-common-substring matching and the Ratcliff-Obershelp overlap
//! ratio.
//!
//! Strings are compared as sequences of `char`s. When several longest
//! common substrings exist, the one starting leftmost in the first string
//! wins, then leftmost in the second.

/// A common block: `a[a_start..a_start+len] == b[b_start..b_start+len]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Block {
    pub a_start: usize,
    pub b_start: usize,
    pub len: usize,
}

pub fn longest_common_substring(a: &[char], b: &[char]) -> Block {
    let mut best = Block {
        a_start: 0,
        b_start: 0,
        len: 0,
    };
    if a.is_empty() || b.is_empty() {
        return best;
    }
    // prev[j + 1] = length of the common suffix of a[..i] and b[..=j]
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for i in 0..a.len() {
        for j in 0..b.len() {
            cur[j + 1] = if a[i] == b[j] { prev[j] + 1 } else { 0 };
            let len = cur[j + 1];
            if len > best.len {
                best = Block {
                    a_start: i + 1 - len,
                    b_start: j + 1 - len,
                    len,
                };
            } else if len == best.len && len > 0 {
                // same length ending here: prefer leftmost start in `a`,
                // then leftmost in `b`
                let a_start = i + 1 - len;
                let b_start = j + 1 - len;
                if (a_start, b_start) < (best.a_start, best.b_start) {
                    best = Block { a_start, b_start, len };
                }
            }
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    best
}

/// Total length of the matching blocks found by recursively taking the
/// longest common substring and recursing on both sides of it.
pub fn matching_characters(a: &[char], b: &[char]) -> usize {
    let block = longest_common_substring(a, b);
    if block.len == 0 {
        return 0;
    }
    let left = matching_characters(&a[..block.a_start], &b[..block.b_start]);
    let right = matching_characters(&a[block.a_start + block.len..], &b[block.b_start + block.len..]);
    block.len + left + right
}

/// Overlap `2*C/S` with `C` matched characters and `S` the summed lengths.
/// Two empty strings are identical and score 1.
pub fn similarity(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    similarity_chars(&a, &b)
}

pub fn similarity_chars(a: &[char], b: &[char]) -> f64 {
    let total = a.len() + b.len();
    if total == 0 {
        return 1.0;
    }
    2.0 * matching_characters(a, b) as f64 / total as f64
}
