//! Exact maximum-score tree decoding from labeled span scores.
//!
//! A tree's score is the sum of `score(label, start, end)` over its labeled
//! spans. Every span except the root may instead take the implicit null label,
//! which scores 0 and is collapsed in the output (its children attach to the
//! parent). Width-one spans sit directly above a fixed preterminal.

use std::collections::HashMap;

use thiserror::Error;

use crate::treebank::Tree;

/// Largest sentence accepted by [`brute_force_decode`].
pub const BRUTE_FORCE_MAX_LEN: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecodeError {
    #[error("empty sentence")]
    EmptySentence,
    #[error("no labels to put on the root span")]
    NoLabels,
    #[error("sentence of length {0} is too large for exhaustive decoding")]
    TooLarge(usize),
    #[error("label `{0}` is not in the score table")]
    UnknownLabel(String),
    #[error("tree yield has {tree} words, score table covers {table}")]
    YieldMismatch { tree: usize, table: usize },
    #[error("{0}")]
    Shape(String),
}

/// Dense table of span scores.
///
/// Scores are stored label-major, then by start, then by end, for every
/// `0 <= start < end <= n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanScores {
    n: usize,
    labels: Vec<String>,
    preterminals: Vec<String>,
    words: Vec<String>,
    scores: Vec<f64>,
}

/// Number of spans over a sentence of length `n`.
pub fn span_count(n: usize) -> usize {
    n * (n + 1) / 2
}

fn span_offset(n: usize, start: usize, end: usize) -> usize {
    // spans with a smaller start come first: sum_{s<start} (n - s)
    start * n - start * start.saturating_sub(1) / 2 + (end - start - 1)
}

impl SpanScores {
    pub fn new(labels: Vec<String>, preterminals: Vec<String>, words: Vec<String>, scores: Vec<f64>) -> Result<Self, DecodeError> {
        let n = words.len();
        if preterminals.len() != n {
            return Err(DecodeError::Shape(format!("{} preterminals for {n} words", preterminals.len())));
        }
        let want = labels.len() * span_count(n);
        if scores.len() != want {
            return Err(DecodeError::Shape(format!("{} scores, expected {want}", scores.len())));
        }
        if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
            return Err(DecodeError::Shape(format!("non-finite score {bad}")));
        }
        Ok(SpanScores { n, labels, preterminals, words, scores })
    }

    /// Table filled by `f(label_index, start, end)`.
    pub fn from_fn(
        labels: Vec<String>,
        preterminals: Vec<String>,
        words: Vec<String>,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self, DecodeError> {
        let n = words.len();
        let mut scores = Vec::with_capacity(labels.len() * span_count(n));
        for l in 0..labels.len() {
            for start in 0..n {
                for end in start + 1..=n {
                    scores.push(f(l, start, end));
                }
            }
        }
        SpanScores::new(labels, preterminals, words, scores)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn preterminals(&self) -> &[String] {
        &self.preterminals
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// The flat score array in storage order.
    pub fn raw_scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn score(&self, label: usize, start: usize, end: usize) -> f64 {
        debug_assert!(start < end && end <= self.n);
        self.scores[label * span_count(self.n) + span_offset(self.n, start, end)]
    }

    pub fn set_score(&mut self, label: usize, start: usize, end: usize, value: f64) {
        let i = label * span_count(self.n) + span_offset(self.n, start, end);
        self.scores[i] = value;
    }

    /// Best label choice for a span: `(label, score)` where `None` is the
    /// null label. Real labels win ties in index order; null is taken only
    /// when strictly better. The root span cannot be null.
    fn best_label(&self, start: usize, end: usize) -> (Option<usize>, f64) {
        let is_root = start == 0 && end == self.n;
        let mut best: Option<(usize, f64)> = None;
        for l in 0..self.labels.len() {
            let s = self.score(l, start, end);
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((l, s));
            }
        }
        match best {
            Some((_, s)) if !is_root && 0.0 > s => (None, 0.0),
            Some((l, s)) => (Some(l), s),
            None => (None, 0.0),
        }
    }

    fn preterminal(&self, i: usize) -> Tree {
        Tree::preterminal(self.preterminals[i].clone(), self.words[i].clone())
    }
}

/// Assembles the output tree from per-span labels and split points.
fn build(scores: &SpanScores, labels: &HashMap<(usize, usize), Option<usize>>, splits: &HashMap<(usize, usize), usize>, start: usize, end: usize) -> Vec<Tree> {
    let children = if end - start == 1 {
        vec![scores.preterminal(start)]
    } else {
        let k = splits[&(start, end)];
        let mut kids = build(scores, labels, splits, start, k);
        kids.extend(build(scores, labels, splits, k, end));
        kids
    };
    match labels[&(start, end)] {
        Some(l) => vec![Tree::node(scores.labels[l].clone(), children)],
        None => children,
    }
}

fn single_root(mut trees: Vec<Tree>) -> Tree {
    debug_assert_eq!(trees.len(), 1);
    trees.pop().unwrap()
}

/// Chart decoding of the maximum-scoring tree.
///
/// Ties go to the lowest label index, then the smallest split point.
pub fn decode(scores: &SpanScores) -> Result<Tree, DecodeError> {
    let n = scores.n;
    if n == 0 {
        return Err(DecodeError::EmptySentence);
    }
    if scores.labels.is_empty() {
        return Err(DecodeError::NoLabels);
    }
    let mut best = vec![vec![0.0f64; n + 1]; n + 1];
    let mut labels = HashMap::new();
    let mut splits = HashMap::new();
    for width in 1..=n {
        for start in 0..=n - width {
            let end = start + width;
            let (label, label_score) = scores.best_label(start, end);
            let mut split_score = 0.0;
            if width > 1 {
                let mut best_k = start + 1;
                split_score = f64::NEG_INFINITY;
                for k in start + 1..end {
                    let s = best[start][k] + best[k][end];
                    if s > split_score {
                        split_score = s;
                        best_k = k;
                    }
                }
                splits.insert((start, end), best_k);
            }
            best[start][end] = label_score + split_score;
            labels.insert((start, end), label);
        }
    }
    Ok(single_root(build(scores, &labels, &splits, 0, n)))
}

/// Sum of span scores over the tree's labeled non-preterminal nodes.
pub fn tree_score(tree: &Tree, scores: &SpanScores) -> Result<f64, DecodeError> {
    let len = tree.yield_len();
    if len != scores.n {
        return Err(DecodeError::YieldMismatch { tree: len, table: scores.n });
    }
    let mut total = 0.0;
    accumulate(tree, 0, scores, &mut total)?;
    Ok(total)
}

fn accumulate(tree: &Tree, start: usize, scores: &SpanScores, total: &mut f64) -> Result<usize, DecodeError> {
    match tree {
        Tree::Leaf(_) => Ok(start + 1),
        Tree::Internal { label, children } => {
            let mut end = start;
            for c in children {
                end = accumulate(c, end, scores, total)?;
            }
            if !tree.is_preterminal() {
                let l = scores.label_index(label).ok_or_else(|| DecodeError::UnknownLabel(label.clone()))?;
                *total += scores.score(l, start, end);
            }
            Ok(end)
        }
    }
}

/// Exhaustive search over every binary bracketing, used as a reference for
/// [`decode`]. Given a bracketing, each span's label is chosen independently
/// with the same rule as the chart decoder; bracketings are visited in order
/// of smallest split point first and only a strictly better total replaces
/// the incumbent.
pub fn brute_force_decode(scores: &SpanScores) -> Result<Tree, DecodeError> {
    let n = scores.n;
    if n == 0 {
        return Err(DecodeError::EmptySentence);
    }
    if n > BRUTE_FORCE_MAX_LEN {
        return Err(DecodeError::TooLarge(n));
    }
    if scores.labels.is_empty() {
        return Err(DecodeError::NoLabels);
    }
    let mut best: Option<(f64, Vec<(usize, usize, usize)>)> = None;
    for bracketing in bracketings(0, n) {
        let total: f64 = bracketing.iter().map(|&(a, _, b)| scores.best_label(a, b).1).sum();
        if best.as_ref().is_none_or(|(b, _)| total > *b) {
            best = Some((total, bracketing));
        }
    }
    let (_, bracketing) = best.unwrap();
    let mut labels = HashMap::new();
    let mut splits = HashMap::new();
    for (a, k, b) in bracketing {
        labels.insert((a, b), scores.best_label(a, b).0);
        if b - a > 1 {
            splits.insert((a, b), k);
        }
    }
    Ok(single_root(build(scores, &labels, &splits, 0, n)))
}

/// All binary bracketings of `[start, end)` as lists of `(start, split, end)`
/// (split unused for width one), smallest root split first.
fn bracketings(start: usize, end: usize) -> Vec<Vec<(usize, usize, usize)>> {
    if end - start == 1 {
        return vec![vec![(start, start, end)]];
    }
    let mut out = Vec::new();
    for k in start + 1..end {
        let left = bracketings(start, k);
        let right = bracketings(k, end);
        for l in &left {
            for r in &right {
                let mut spans = vec![(start, k, end)];
                spans.extend_from_slice(l);
                spans.extend_from_slice(r);
                out.push(spans);
            }
        }
    }
    out
}
