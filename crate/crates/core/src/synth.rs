//! Random trees and synthetic N-best corpora for tests and demos.
//!
//! Each synthetic hypothesis is the gold tree damaged by word errors
//! (substitution, deletion, insertion) and structural errors (relabeling,
//! flattening). Its ASR score falls with the number of word errors and its
//! parse score with the number of structural errors, each with Gaussian
//! noise, so target F1 is a noisy monotone function of the two scores.
//! Hypotheses are ranked by ASR score, as a recognizer would.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::pipeline::corpus::{CorpusRecord, HypothesisRecord};
use crate::treebank::{Tree, EDITED};

pub const PHRASE_LABELS: &[&str] = &["NP", "VP", "PP", "ADJP", "ADVP", "INTJ", "SBAR", "S"];
pub const TAGS: &[&str] = &["NN", "NNS", "VB", "VBP", "VBD", "PRP", "DT", "IN", "JJ", "RB", "UH"];
pub const VOCABULARY: &[&str] = &[
    "i", "you", "we", "they", "it", "that", "the", "a", "like", "know", "think", "mean", "go", "went", "do", "did", "is",
    "was", "have", "had", "music", "rap", "house", "car", "kids", "school", "job", "really", "just", "so", "well", "uh",
    "um", "yeah", "good", "big", "old", "to", "of", "in", "on", "about", "and", "but", "because", "then", "there", "here",
];

fn pick<'a, R: Rng>(rng: &mut R, xs: &[&'a str]) -> &'a str {
    xs.choose(rng).unwrap()
}

/// Random tree over `words` with root `root_label`. Non-root phrases get
/// labels from `labels`; each non-root phrase is EDITED with probability
/// `edited_prob`.
pub fn random_tree<R: Rng>(rng: &mut R, words: &[String], root_label: &str, labels: &[&str], edited_prob: f64) -> Tree {
    assert!(!words.is_empty());
    let kids = random_children(rng, words, labels, edited_prob);
    Tree::node(root_label, kids)
}

fn random_children<R: Rng>(rng: &mut R, words: &[String], labels: &[&str], edited_prob: f64) -> Vec<Tree> {
    let n = words.len();
    if n == 1 {
        return vec![Tree::preterminal(pick(rng, TAGS), words[0].clone())];
    }
    let k = rng.gen_range(2..=n.min(3));
    let mut cuts: Vec<usize> = rand::seq::index::sample(rng, n - 1, k - 1).into_iter().map(|c| c + 1).collect();
    cuts.sort_unstable();
    let mut bounds = vec![0];
    bounds.extend(cuts);
    bounds.push(n);
    bounds
        .windows(2)
        .map(|w| {
            let part = &words[w[0]..w[1]];
            if part.len() == 1 && rng.gen_bool(0.5) {
                Tree::preterminal(pick(rng, TAGS), part[0].clone())
            } else {
                let label = if rng.gen_bool(edited_prob) { EDITED } else { pick(rng, labels) };
                Tree::node(label, random_children(rng, part, labels, edited_prob))
            }
        })
        .collect()
}

/// Random sentence of `n` words from [`VOCABULARY`].
pub fn random_words<R: Rng>(rng: &mut R, n: usize) -> Vec<String> {
    (0..n).map(|_| pick(rng, VOCABULARY).to_string()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub sentences: usize,
    pub max_hypotheses: usize,
    pub min_words: usize,
    pub max_words: usize,
    /// Upper bound of the per-hypothesis word error probability.
    pub max_word_error: f64,
    /// Upper bound of the per-hypothesis structural error probability.
    pub max_parse_error: f64,
    /// Stddev of the Gaussian noise on both scores, in score units per error.
    pub score_noise: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            sentences: 200,
            max_hypotheses: 10,
            min_words: 4,
            max_words: 12,
            max_word_error: 0.3,
            max_parse_error: 0.5,
            score_noise: 0.5,
        }
    }
}

struct Damage {
    word_errors: usize,
    parse_errors: usize,
}

fn damage_words<R: Rng>(rng: &mut R, tree: &Tree, rate: f64, d: &mut Damage) -> Vec<Tree> {
    match tree {
        Tree::Leaf(_) => vec![tree.clone()],
        Tree::Internal { label, .. } if tree.is_preterminal() => {
            if !rng.gen_bool(rate) {
                return vec![tree.clone()];
            }
            d.word_errors += 1;
            match rng.gen_range(0..5) {
                0 => vec![],
                1 => vec![tree.clone(), Tree::preterminal(pick(rng, TAGS), pick(rng, VOCABULARY))],
                _ => vec![Tree::preterminal(label.clone(), pick(rng, VOCABULARY))],
            }
        }
        Tree::Internal { label, children } => {
            let kids: Vec<Tree> = children.iter().flat_map(|c| damage_words(rng, c, rate, d)).collect();
            if kids.is_empty() {
                vec![]
            } else {
                vec![Tree::Internal { label: label.clone(), children: kids }]
            }
        }
    }
}

fn damage_structure<R: Rng>(rng: &mut R, tree: &Tree, rate: f64, is_root: bool, d: &mut Damage) -> Vec<Tree> {
    match tree {
        Tree::Leaf(_) => vec![tree.clone()],
        _ if tree.is_preterminal() => vec![tree.clone()],
        Tree::Internal { label, children } => {
            let kids: Vec<Tree> = children.iter().flat_map(|c| damage_structure(rng, c, rate, false, d)).collect();
            if !is_root && rng.gen_bool(rate) {
                d.parse_errors += 1;
                if rng.gen_bool(0.5) {
                    return kids;
                }
                let others: Vec<&str> = PHRASE_LABELS.iter().copied().filter(|l| l != label).collect();
                return vec![Tree::node(pick(rng, &others), kids)];
            }
            vec![Tree::Internal { label: label.clone(), children: kids }]
        }
    }
}

/// Generates a corpus; identical `(config, seed)` give identical records.
pub fn generate_corpus(config: &SynthConfig, seed: u64) -> Vec<CorpusRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, config.score_noise.max(1e-12)).expect("finite noise");
    (0..config.sentences)
        .map(|i| {
            let n = rng.gen_range(config.min_words..=config.max_words);
            let words = random_words(&mut rng, n);
            let gold = random_tree(&mut rng, &words, "S", PHRASE_LABELS, 0.05);
            let count = rng.gen_range(2..=config.max_hypotheses.max(2));
            let mut hyps: Vec<HypothesisRecord> = (0..count)
                .map(|_| {
                    let word_rate = rng.gen_range(0.0..config.max_word_error);
                    let parse_rate = rng.gen_range(0.0..config.max_parse_error);
                    let mut d = Damage { word_errors: 0, parse_errors: 0 };
                    let mut parse = damage_words(&mut rng, &gold, word_rate, &mut d).pop().unwrap_or_else(|| {
                        Tree::node("S", vec![Tree::preterminal("UH", pick(&mut rng, VOCABULARY))])
                    });
                    parse = damage_structure(&mut rng, &parse, parse_rate, true, &mut d).pop().unwrap();
                    let len = parse.yield_len() as f64;
                    let asr_score = -2.0 * len - 4.0 * (d.word_errors as f64 + noise.sample(&mut rng));
                    let parse_score = -len - 4.0 * (d.parse_errors as f64 + noise.sample(&mut rng));
                    HypothesisRecord {
                        words: parse.words().iter().map(|w| w.to_string()).collect(),
                        asr_score,
                        parse: parse.to_string(),
                        parse_score,
                        timings: None,
                    }
                })
                .collect();
            hyps.sort_by(|a, b| b.asr_score.total_cmp(&a.asr_score));
            CorpusRecord { id: format!("syn{seed}-{i:04}"), gold: gold.to_string(), transcription_error: None, hypotheses: hyps }.canonical()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_tree_covers_words() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..10 {
            let words = random_words(&mut rng, n);
            let t = random_tree(&mut rng, &words, "S", PHRASE_LABELS, 0.1);
            assert_eq!(t.words(), words.iter().map(String::as_str).collect::<Vec<_>>());
            assert_eq!(t.label(), Some("S"));
        }
    }

    #[test]
    fn corpus_is_valid_and_deterministic() {
        let cfg = SynthConfig { sentences: 20, ..SynthConfig::default() };
        let a = generate_corpus(&cfg, 5);
        assert_eq!(a, generate_corpus(&cfg, 5));
        for r in &a {
            r.to_hypothesis_set().unwrap();
            assert!(r.hypotheses.len() >= 2 && r.hypotheses.len() <= 10);
            assert!(r.hypotheses.windows(2).all(|w| w[0].asr_score >= w[1].asr_score));
        }
    }
}
