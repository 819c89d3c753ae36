//! Bracket and dependency F1 between a gold tree and a parse of a possibly
//! mis-recognized word sequence.

use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::AlignmentMap;
use crate::treebank::{constituents, dependencies, DependencyTuple, HeadRules, Tree, EDITED};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScoreError {
    #[error("alignment pair (hyp {hyp}, gold {gold}) is outside the yields (hyp {hyp_len}, gold {gold_len})")]
    AlignmentOutOfRange { hyp: usize, gold: usize, hyp_len: usize, gold_len: usize },
    #[error("configuration is for {0} scoring")]
    ModeMismatch(Mode),
}

/// Match counts with the derived precision, recall and F1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F1Score {
    pub matched: usize,
    pub gold_count: usize,
    pub pred_count: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl F1Score {
    pub fn from_counts(matched: usize, gold_count: usize, pred_count: usize) -> Self {
        debug_assert!(matched <= gold_count.min(pred_count));
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(matched, pred_count);
        let recall = ratio(matched, gold_count);
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        F1Score { matched, gold_count, pred_count, precision, recall, f1 }
    }

    pub fn zero() -> Self {
        F1Score::from_counts(0, 0, 0)
    }

    /// Adds counts and recomputes the ratios.
    pub fn combine(&self, other: &F1Score) -> F1Score {
        F1Score::from_counts(
            self.matched + other.matched,
            self.gold_count + other.gold_count,
            self.pred_count + other.pred_count,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Dependency,
    Bracket,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Dependency => "dep",
            Mode::Bracket => "brk",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScoreConfig {
    pub labeled: bool,
    pub mode: Mode,
    pub include_edited: bool,
    pub include_preterminals: bool,
}

impl ScoreConfig {
    pub fn new(labeled: bool, mode: Mode) -> Self {
        ScoreConfig { labeled, mode, include_edited: false, include_preterminals: false }
    }

    /// All flag combinations for both modes.
    pub fn all() -> Vec<ScoreConfig> {
        let mut out = Vec::new();
        for mode in [Mode::Dependency, Mode::Bracket] {
            for labeled in [false, true] {
                for include_edited in [false, true] {
                    for include_preterminals in [false, true] {
                        out.push(ScoreConfig { labeled, mode, include_edited, include_preterminals });
                    }
                }
            }
        }
        out
    }
}

/// One of the four scoring objectives: {unlabeled, labeled} x {dep, brk}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Objective {
    pub labeled: bool,
    pub mode: Mode,
}

impl Objective {
    /// Column order of the reported tables.
    pub const ALL: [Objective; 4] = [
        Objective { labeled: false, mode: Mode::Dependency },
        Objective { labeled: false, mode: Mode::Bracket },
        Objective { labeled: true, mode: Mode::Dependency },
        Objective { labeled: true, mode: Mode::Bracket },
    ];

    pub const LABELED_BRACKET: Objective = Objective { labeled: true, mode: Mode::Bracket };

    pub fn index(&self) -> usize {
        Objective::ALL.iter().position(|o| o == self).unwrap()
    }

    pub fn config(&self, include_edited: bool, include_preterminals: bool) -> ScoreConfig {
        ScoreConfig { labeled: self.labeled, mode: self.mode, include_edited, include_preterminals }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let l = if self.labeled { "labeled" } else { "unlabeled" };
        write!(f, "{l}-{}", self.mode)
    }
}

impl FromStr for Objective {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Objective::ALL
            .iter()
            .copied()
            .find(|o| o.to_string() == s)
            .ok_or_else(|| format!("unknown objective `{s}` (expected labeled-brk, unlabeled-dep, ...)"))
    }
}

impl Serialize for Objective {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Objective {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Size of the multiset intersection of `gold` and `pred`.
pub fn multiset_matches<K: Eq + Hash>(gold: impl IntoIterator<Item = K>, pred: impl IntoIterator<Item = K>) -> usize {
    let mut remaining: HashMap<K, usize> = HashMap::new();
    for k in gold {
        *remaining.entry(k).or_insert(0) += 1;
    }
    let mut matched = 0;
    for k in pred {
        if let Some(n) = remaining.get_mut(&k) {
            if *n > 0 {
                *n -= 1;
                matched += 1;
            }
        }
    }
    matched
}

/// Labeled or unlabeled bracket F1 of `pred` against `gold`.
///
/// `align` maps indices of the predicted yield onto the gold yield. A
/// predicted span `(l, a, b)` is compared as `(l, map(a), map(b-1)+1)` and only
/// when both of its end words are aligned; other predicted spans stay in the
/// predicted count and cannot match.
pub fn bracket_score(gold: &Tree, pred: &Tree, align: &AlignmentMap, config: &ScoreConfig) -> Result<F1Score, ScoreError> {
    if config.mode != Mode::Bracket {
        return Err(ScoreError::ModeMismatch(config.mode));
    }
    let gold_len = gold.yield_len();
    let hyp_len = pred.yield_len();
    if let Some((hyp, g)) = align.iter().find(|&(h, g)| h >= hyp_len || g >= gold_len) {
        return Err(ScoreError::AlignmentOutOfRange { hyp, gold: g, hyp_len, gold_len });
    }
    let key = |label: &str, start: usize, end: usize| {
        let label = if config.labeled { label.to_string() } else { String::new() };
        (label, start, end)
    };
    let gold_spans = constituents(gold, config.include_preterminals, config.include_edited);
    let pred_spans = constituents(pred, config.include_preterminals, config.include_edited);
    let projected = pred_spans.iter().filter_map(|c| {
        let start = align.get(c.start)?;
        let last = align.get(c.end - 1)?;
        Some(key(&c.label, start, last + 1))
    });
    let matched = multiset_matches(gold_spans.iter().map(|c| key(&c.label, c.start, c.end)), projected);
    Ok(F1Score::from_counts(matched, gold_spans.len(), pred_spans.len()))
}

/// F1 over two dependency multisets, comparing `(h, d, r)` when labeled and
/// `(h, d)` otherwise.
pub fn dependency_f1(gold: &[DependencyTuple], pred: &[DependencyTuple], labeled: bool) -> F1Score {
    let key = |t: &DependencyTuple| {
        let relation = if labeled { t.relation.as_str() } else { "" };
        (t.head.clone(), t.dependent.clone(), relation.to_string())
    };
    let matched = multiset_matches(gold.iter().map(key), pred.iter().map(key));
    F1Score::from_counts(matched, gold.len(), pred.len())
}

/// Dependency F1 of `pred` against `gold`. No word alignment is involved.
pub fn dependency_score(gold: &Tree, pred: &Tree, rules: &HeadRules, config: &ScoreConfig) -> Result<F1Score, ScoreError> {
    if config.mode != Mode::Dependency {
        return Err(ScoreError::ModeMismatch(config.mode));
    }
    let deps = |t: &Tree| -> Vec<DependencyTuple> {
        if config.include_edited {
            dependencies(t, rules)
        } else {
            t.without_label(EDITED).map(|t| dependencies(&t, rules)).unwrap_or_default()
        }
    };
    Ok(dependency_f1(&deps(gold), &deps(pred), config.labeled))
}

/// Dispatches on `config.mode`.
pub fn score(gold: &Tree, pred: &Tree, align: &AlignmentMap, rules: &HeadRules, config: &ScoreConfig) -> Result<F1Score, ScoreError> {
    match config.mode {
        Mode::Bracket => bracket_score(gold, pred, align, config),
        Mode::Dependency => dependency_score(gold, pred, rules, config),
    }
}

/// Micro-averaged corpus score.
pub fn corpus_score<'a>(per_sentence: impl IntoIterator<Item = &'a F1Score>) -> F1Score {
    per_sentence.into_iter().fold(F1Score::zero(), |acc, s| acc.combine(s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alignment::word_alignment;
    use crate::treebank::parse_ptb;

    const GOLD: &str = "(S (NP (PRP i)) (VP (VBP like) (NP (NN music))))";
    const PRED: &str = "(S (NP (PRP i)) (VP (VBP like) (NP (DT the) (NN music))))";

    fn dep(h: &str, d: &str, r: &str) -> DependencyTuple {
        DependencyTuple { head: h.into(), dependent: d.into(), relation: r.into() }
    }

    #[test]
    fn f1_conventions() {
        let z = F1Score::from_counts(0, 0, 0);
        assert_eq!((z.precision, z.recall, z.f1), (0.0, 0.0, 0.0));
        let s = F1Score::from_counts(0, 3, 0);
        assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
        let s = F1Score::from_counts(2, 2, 3);
        assert!((s.f1 - 0.8).abs() < 1e-12);
    }

    #[test]
    fn self_score_is_one() {
        let t = parse_ptb(GOLD).unwrap();
        let rules = HeadRules::default();
        for cfg in ScoreConfig::all() {
            let s = score(&t, &t, &AlignmentMap::identity(3), &rules, &cfg).unwrap();
            assert_eq!(s.f1, 1.0, "{cfg:?}");
        }
    }

    #[test]
    fn inserted_word_fixture() {
        let gold = parse_ptb(GOLD).unwrap();
        let pred = parse_ptb(PRED).unwrap();
        let align = word_alignment(&gold.words(), &pred.words());
        let s = bracket_score(&gold, &pred, &align, &ScoreConfig::new(true, Mode::Bracket)).unwrap();
        assert_eq!((s.matched, s.gold_count, s.pred_count), (3, 4, 4));
        assert_eq!((s.precision, s.recall, s.f1), (0.75, 0.75, 0.75));
    }

    #[test]
    fn empty_alignment_scores_zero() {
        let gold = parse_ptb(GOLD).unwrap();
        let pred = parse_ptb(PRED).unwrap();
        let s = bracket_score(&gold, &pred, &AlignmentMap::default(), &ScoreConfig::new(true, Mode::Bracket)).unwrap();
        assert_eq!((s.matched, s.gold_count, s.pred_count, s.f1), (0, 4, 4, 0.0));
    }

    #[test]
    fn alignment_out_of_range() {
        let gold = parse_ptb(GOLD).unwrap();
        let align = AlignmentMap::from_pairs([(0, 0), (5, 1)]).unwrap();
        let err = bracket_score(&gold, &gold, &align, &ScoreConfig::new(true, Mode::Bracket)).unwrap_err();
        assert!(matches!(err, ScoreError::AlignmentOutOfRange { hyp: 5, .. }));
    }

    #[test]
    fn mode_mismatch() {
        let t = parse_ptb(GOLD).unwrap();
        let err = bracket_score(&t, &t, &AlignmentMap::identity(3), &ScoreConfig::new(true, Mode::Dependency));
        assert_eq!(err, Err(ScoreError::ModeMismatch(Mode::Dependency)));
    }

    #[test]
    fn dependency_fixture() {
        let gold = [dep("like", "i", "S"), dep("like", "music", "VP")];
        let pred = [dep("like", "i", "S"), dep("like", "the", "NP"), dep("like", "music", "VP")];
        let s = dependency_f1(&gold, &pred, true);
        assert_eq!(s.matched, 2);
        assert!((s.precision - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(s.recall, 1.0);
        assert!((s.f1 - 0.8).abs() < 1e-12);
    }

    #[test]
    fn dependency_score_on_trees() {
        let gold = parse_ptb(GOLD).unwrap();
        let pred = parse_ptb(PRED).unwrap();
        let s = dependency_score(&gold, &pred, &HeadRules::default(), &ScoreConfig::new(true, Mode::Dependency)).unwrap();
        assert_eq!((s.matched, s.gold_count, s.pred_count), (2, 2, 3));
        assert!((s.f1 - 0.8).abs() < 1e-12);
    }

    #[test]
    fn unlabeled_dependencies_ignore_relation() {
        let gold = [dep("a", "b", "X")];
        let pred = [dep("a", "b", "Y")];
        assert_eq!(dependency_f1(&gold, &pred, true).matched, 0);
        assert_eq!(dependency_f1(&gold, &pred, false).matched, 1);
    }

    #[test]
    fn edited_toggle() {
        let gold = parse_ptb("(S (EDITED (NP (PRP i))) (NP (PRP i)) (VP (VBP go)))").unwrap();
        let pred = parse_ptb("(S (NP (PRP i)) (NP (PRP i)) (VP (VBP go)))").unwrap();
        let id = AlignmentMap::identity(3);
        let mut cfg = ScoreConfig::new(true, Mode::Bracket);
        let s = bracket_score(&gold, &pred, &id, &cfg).unwrap();
        // the NP inside EDITED still counts
        assert_eq!((s.matched, s.gold_count, s.pred_count), (4, 4, 4));
        cfg.include_edited = true;
        let s = bracket_score(&gold, &pred, &id, &cfg).unwrap();
        assert_eq!((s.matched, s.gold_count, s.pred_count), (4, 5, 4));
    }

    #[test]
    fn duplicates_match_one_to_one() {
        assert_eq!(multiset_matches(["a", "a", "b"], ["a", "b", "b"]), 2);
        assert_eq!(multiset_matches(["a"], ["a", "a"]), 1);
    }

    #[test]
    fn corpus_micro_average() {
        let a = F1Score::from_counts(1, 2, 2);
        let b = F1Score::from_counts(3, 4, 4);
        let c = corpus_score([&a, &b]);
        assert_eq!((c.matched, c.gold_count, c.pred_count), (4, 6, 6));
        assert!((c.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(corpus_score([&a]), a);
    }

    #[test]
    fn objective_names_round_trip() {
        for o in Objective::ALL {
            assert_eq!(o.to_string().parse::<Objective>().unwrap(), o);
        }
        assert_eq!(Objective::LABELED_BRACKET.to_string(), "labeled-brk");
    }
}
