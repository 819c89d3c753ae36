//! Word alignment by recursive longest-common-block matching, and word error rate.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AlignError {
    #[error("empty reference with non-empty hypothesis")]
    EmptyReference,
    #[error("alignment is not injective and order-preserving at hyp index {0}")]
    NotMonotone(usize),
}

/// A run of `length` equal words at `a[a_start..]` and `b[b_start..]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchingBlock {
    pub a_start: usize,
    pub b_start: usize,
    pub length: usize,
}

fn fold(words: &[impl AsRef<str>]) -> Vec<String> {
    words.iter().map(|w| w.as_ref().to_lowercase()).collect()
}

/// Ratcliff/Obershelp matching blocks over case-folded words, ascending.
///
/// The longest common contiguous block is taken (earliest in `a`, then
/// earliest in `b` on ties) and the procedure recurses on the remainders to
/// its left and right. No junk heuristic is applied.
pub fn matching_blocks<S: AsRef<str>, T: AsRef<str>>(a: &[S], b: &[T]) -> Vec<MatchingBlock> {
    let a = fold(a);
    let b = fold(b);
    let mut blocks = Vec::new();
    let mut stack = vec![(0, a.len(), 0, b.len())];
    while let Some((alo, ahi, blo, bhi)) = stack.pop() {
        let Some(block) = longest_match(&a, &b, alo, ahi, blo, bhi) else {
            continue;
        };
        blocks.push(block);
        let (i, j, k) = (block.a_start, block.b_start, block.length);
        if alo < i && blo < j {
            stack.push((alo, i, blo, j));
        }
        if i + k < ahi && j + k < bhi {
            stack.push((i + k, ahi, j + k, bhi));
        }
    }
    blocks.sort_by_key(|m| (m.a_start, m.b_start));
    blocks
}

fn longest_match(a: &[String], b: &[String], alo: usize, ahi: usize, blo: usize, bhi: usize) -> Option<MatchingBlock> {
    // run[j] = length of the common run ending at (i, j) for the current row i
    let width = bhi - blo;
    let mut prev = vec![0usize; width + 1];
    let mut cur = vec![0usize; width + 1];
    let mut best: Option<MatchingBlock> = None;
    for i in alo..ahi {
        for j in blo..bhi {
            let col = j - blo + 1;
            cur[col] = if a[i] == b[j] { prev[col - 1] + 1 } else { 0 };
            let len = cur[col];
            if len == 0 {
                continue;
            }
            let cand = MatchingBlock { a_start: i + 1 - len, b_start: j + 1 - len, length: len };
            let better = match best {
                None => true,
                Some(bm) => {
                    len > bm.length
                        || (len == bm.length && (cand.a_start, cand.b_start) < (bm.a_start, bm.b_start))
                }
            };
            if better {
                best = Some(cand);
            }
        }
        std::mem::swap(&mut prev, &mut cur);
        cur.iter_mut().for_each(|x| *x = 0);
    }
    best
}

/// Partial, injective, order-preserving map from hypothesis word index to
/// gold word index.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AlignmentMap {
    pairs: BTreeMap<usize, usize>,
}

impl AlignmentMap {
    /// Validates injectivity and monotonicity.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, AlignError> {
        let pairs: BTreeMap<usize, usize> = pairs.into_iter().collect();
        let mut last: Option<usize> = None;
        for (&h, &g) in &pairs {
            if last.is_some_and(|l| g <= l) {
                return Err(AlignError::NotMonotone(h));
            }
            last = Some(g);
        }
        Ok(AlignmentMap { pairs })
    }

    pub fn identity(n: usize) -> Self {
        AlignmentMap { pairs: (0..n).map(|i| (i, i)).collect() }
    }

    pub fn get(&self, hyp_index: usize) -> Option<usize> {
        self.pairs.get(&hyp_index).copied()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// `(hyp, gold)` pairs in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().map(|(&h, &g)| (h, g))
    }

    /// The map from gold index to hypothesis index.
    pub fn inverse(&self) -> AlignmentMap {
        AlignmentMap { pairs: self.pairs.iter().map(|(&h, &g)| (g, h)).collect() }
    }
}

/// Aligns hypothesis words onto gold words through [`matching_blocks`].
pub fn word_alignment<S: AsRef<str>, T: AsRef<str>>(gold: &[S], hyp: &[T]) -> AlignmentMap {
    let pairs = matching_blocks(gold, hyp)
        .into_iter()
        .flat_map(|m| (0..m.length).map(move |k| (m.b_start + k, m.a_start + k)))
        .collect();
    AlignmentMap { pairs }
}

/// Edit counts of a minimal word-level alignment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EditSummary {
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
    pub reference_len: usize,
    pub wer: f64,
}

impl EditSummary {
    pub fn errors(&self) -> usize {
        self.substitutions + self.insertions + self.deletions
    }
}

/// Word error rate with unit costs over case-folded words.
///
/// Among minimal alignments the one with fewest substitutions, then fewest
/// deletions, determines the component counts.
pub fn wer<S: AsRef<str>, T: AsRef<str>>(reference: &[S], hypothesis: &[T]) -> Result<EditSummary, AlignError> {
    let r = fold(reference);
    let h = fold(hypothesis);
    if r.is_empty() && !h.is_empty() {
        return Err(AlignError::EmptyReference);
    }
    // cost = (total edits, substitutions, deletions), compared lexicographically
    type Cost = (usize, usize, usize);
    let cols = h.len() + 1;
    let mut prev: Vec<Cost> = (0..cols).map(|j| (j, 0, 0)).collect();
    let mut cur: Vec<Cost> = vec![(0, 0, 0); cols];
    for i in 1..=r.len() {
        cur[0] = (i, 0, i);
        for j in 1..cols {
            let (t, s, d) = prev[j - 1];
            let diag = if r[i - 1] == h[j - 1] { (t, s, d) } else { (t + 1, s + 1, d) };
            let (t, s, d) = prev[j];
            let del = (t + 1, s, d + 1);
            let (t, s, d) = cur[j - 1];
            let ins = (t + 1, s, d);
            cur[j] = diag.min(del).min(ins);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let (total, substitutions, deletions) = prev[cols - 1];
    let insertions = total - substitutions - deletions;
    let wer = if r.is_empty() { 0.0 } else { total as f64 / r.len() as f64 };
    Ok(EditSummary { substitutions, insertions, deletions, reference_len: r.len(), wer })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(a_start: usize, b_start: usize, length: usize) -> MatchingBlock {
        MatchingBlock { a_start, b_start, length }
    }

    #[test]
    fn blocks_fixture() {
        let a = ["i", "mean", "that", "s", "better"];
        let b = ["i", "mean", "that", "is", "better"];
        assert_eq!(matching_blocks(&a, &b), vec![block(0, 0, 3), block(4, 4, 1)]);
    }

    #[test]
    fn blocks_identity_and_disjoint() {
        let a = ["a", "b", "c"];
        assert_eq!(matching_blocks(&a, &a), vec![block(0, 0, 3)]);
        assert!(matching_blocks(&a, &["x", "y"]).is_empty());
        assert!(matching_blocks::<&str, &str>(&[], &[]).is_empty());
    }

    #[test]
    fn blocks_tie_break_prefers_earliest() {
        // "a" occurs twice in b; earliest b_start wins for the same a_start
        assert_eq!(matching_blocks(&["a"], &["a", "a"]), vec![block(0, 0, 1)]);
        assert_eq!(matching_blocks(&["a", "a"], &["a"]), vec![block(0, 0, 1)]);
    }

    #[test]
    fn blocks_are_case_insensitive() {
        assert_eq!(matching_blocks(&["I", "Like"], &["i", "like"]), vec![block(0, 0, 2)]);
    }

    #[test]
    fn alignment_with_insertion() {
        let m = word_alignment(&["i", "like", "music"], &["i", "like", "the", "music"]);
        assert_eq!(m.iter().collect::<Vec<_>>(), vec![(0, 0), (1, 1), (3, 2)]);
        assert_eq!(m.get(2), None);
        assert!(word_alignment::<&str, &str>(&["a"], &[]).is_empty());
        assert_eq!(word_alignment(&["a", "b"], &["a", "b"]), AlignmentMap::identity(2));
    }

    #[test]
    fn alignment_validation() {
        assert!(AlignmentMap::from_pairs([(0, 1), (1, 0)]).is_err());
        assert!(AlignmentMap::from_pairs([(0, 1), (2, 1)]).is_err());
        let m = AlignmentMap::from_pairs([(0, 0), (3, 2)]).unwrap();
        assert_eq!(m.inverse().get(2), Some(3));
    }

    #[test]
    fn wer_fixtures() {
        let e = wer(&["do", "you", "like", "rap", "music"], &["you", "like", "rap", "music"]).unwrap();
        assert_eq!((e.substitutions, e.insertions, e.deletions), (0, 0, 1));
        assert!((e.wer - 0.2).abs() < 1e-12);
        assert_eq!(wer(&["a", "b"], &["a", "b"]).unwrap().wer, 0.0);
        let e = wer(&["a"], &["b"]).unwrap();
        assert_eq!((e.substitutions, e.wer), (1, 1.0));
        assert_eq!(wer::<&str, &str>(&[], &["a"]), Err(AlignError::EmptyReference));
        assert_eq!(wer::<&str, &str>(&[], &[]).unwrap().wer, 0.0);
    }

    #[test]
    fn wer_prefers_fewer_substitutions() {
        // [a b] vs [b c]: either 2 substitutions or 1 deletion + 1 insertion
        let e = wer(&["a", "b"], &["b", "c"]).unwrap();
        assert_eq!((e.substitutions, e.insertions, e.deletions), (0, 1, 1));
    }
}
