//! Comparison of two selection vectors: scores split by transcription
//! error, and the kind of words that change between the chosen hypotheses.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::scoring::{evaluate_selections, ObjectiveScore, ScoredSentence};
use super::{read_file, PipelineError};
use crate::alignment::matching_blocks;

/// Closed-class English words used when no list is supplied.
pub const DEFAULT_FUNCTION_WORDS: &[&str] = &[
    "a", "about", "after", "all", "am", "an", "and", "any", "are", "as", "at", "be", "been", "before", "being", "but", "by",
    "can", "could", "did", "do", "does", "down", "for", "from", "had", "has", "have", "he", "her", "him", "his", "how",
    "i", "if", "in", "into", "is", "it", "its", "just", "may", "me", "might", "my", "no", "nor", "not", "of", "off", "on",
    "or", "our", "out", "over", "s", "shall", "she", "should", "so", "some", "than", "that", "the", "their", "them",
    "then", "there", "these", "they", "this", "those", "to", "too", "under", "up", "us", "was", "we", "were", "what",
    "when", "where", "which", "while", "who", "whom", "why", "will", "with", "would", "you", "your", "uh", "um", "oh",
    "well", "like", "yeah", "n't", "'s", "'re", "'m", "'ll", "'ve", "'d",
];

/// One word per line; `#` starts a comment. Words are case-folded.
pub fn load_function_words(path: Option<&Path>) -> Result<HashSet<String>, PipelineError> {
    match path {
        None => Ok(DEFAULT_FUNCTION_WORDS.iter().map(|w| w.to_string()).collect()),
        Some(p) => Ok(read_file(p)?
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(str::to_lowercase)
            .collect()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetScores {
    pub transcription_error: bool,
    pub sentences: usize,
    pub system_a: Vec<ObjectiveScore>,
    pub system_b: Vec<ObjectiveScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordChangeSummary {
    /// `improved`, `degraded` or `unchanged`: WER of B relative to A.
    pub wer_change: String,
    pub sentences: usize,
    pub changed_words: usize,
    pub function_words: usize,
    pub function_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSummary {
    pub system_a: String,
    pub system_b: String,
    pub subsets: Vec<SubsetScores>,
    pub changed_sentences: usize,
    pub word_changes: Vec<WordChangeSummary>,
}

/// Words of either sequence outside the matching blocks.
fn changed_words(a: &[String], b: &[String]) -> Vec<String> {
    let blocks = matching_blocks(a, b);
    let mut in_a = vec![false; a.len()];
    let mut in_b = vec![false; b.len()];
    for m in &blocks {
        in_a[m.a_start..m.a_start + m.length].iter_mut().for_each(|x| *x = true);
        in_b[m.b_start..m.b_start + m.length].iter_mut().for_each(|x| *x = true);
    }
    let unmatched = |words: &[String], hit: &[bool]| -> Vec<String> {
        words.iter().zip(hit).filter(|(_, h)| !**h).map(|(w, _)| w.to_lowercase()).collect()
    };
    let mut out = unmatched(a, &in_a);
    out.extend(unmatched(b, &in_b));
    out
}

pub fn analyze(
    sentences: &[ScoredSentence],
    (name_a, selections_a): (&str, &[usize]),
    (name_b, selections_b): (&str, &[usize]),
    function_words: &HashSet<String>,
) -> Result<AnalysisSummary, PipelineError> {
    if selections_a.len() != sentences.len() || selections_b.len() != sentences.len() {
        return Err(PipelineError::SelectionLengthMismatch { a: selections_a.len(), b: selections_b.len() });
    }
    for (s, (&a, &b)) in sentences.iter().zip(selections_a.iter().zip(selections_b)) {
        let n = s.set.hypotheses.len();
        if a >= n || b >= n {
            return Err(PipelineError::Scoring { id: s.set.id.clone(), message: format!("selection out of range ({n} hypotheses)") });
        }
    }
    let mut subsets = Vec::new();
    for flag in [false, true] {
        let idx: Vec<usize> = (0..sentences.len()).filter(|&i| sentences[i].transcription_error == flag).collect();
        let subset: Vec<ScoredSentence> = idx.iter().map(|&i| sentences[i].clone()).collect();
        let sel = |v: &[usize]| idx.iter().map(|&i| [v[i]; 4]).collect::<Vec<_>>();
        subsets.push(SubsetScores {
            transcription_error: flag,
            sentences: subset.len(),
            system_a: evaluate_selections(&subset, &sel(selections_a)),
            system_b: evaluate_selections(&subset, &sel(selections_b)),
        });
    }

    let categories = ["improved", "degraded", "unchanged"];
    let mut tallies = [(0usize, 0usize, 0usize); 3];
    let mut changed_sentences = 0;
    for (s, (&a, &b)) in sentences.iter().zip(selections_a.iter().zip(selections_b)) {
        if a == b {
            continue;
        }
        changed_sentences += 1;
        let (ea, eb) = (s.scores[a].edits.errors(), s.scores[b].edits.errors());
        let cat = if eb < ea { 0 } else if eb > ea { 1 } else { 2 };
        let words = changed_words(&s.set.hypotheses[a].words, &s.set.hypotheses[b].words);
        let t = &mut tallies[cat];
        t.0 += 1;
        t.1 += words.len();
        t.2 += words.iter().filter(|w| function_words.contains(*w)).count();
    }
    let word_changes = categories
        .iter()
        .zip(tallies)
        .map(|(name, (sentences, changed, function))| WordChangeSummary {
            wer_change: name.to_string(),
            sentences,
            changed_words: changed,
            function_words: function,
            function_share: if changed == 0 { 0.0 } else { function as f64 / changed as f64 },
        })
        .collect();
    Ok(AnalysisSummary { system_a: name_a.into(), system_b: name_b.into(), subsets, changed_sentences, word_changes })
}

impl AnalysisSummary {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("analysis serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("A = {}, B = {}\n\n", self.system_a, self.system_b);
        out.push_str("subset          n  system  objective         F1     WER\n");
        for sub in &self.subsets {
            let name = if sub.transcription_error { "asr-errors" } else { "exact" };
            for (sys, scores) in [("A", &sub.system_a), ("B", &sub.system_b)] {
                for o in scores {
                    out.push_str(&format!(
                        "{:<12} {:>4}  {:<6}  {:<14} {:>6.3}  {:>6.3}\n",
                        name,
                        sub.sentences,
                        sys,
                        o.objective.to_string(),
                        o.f1.f1,
                        o.wer.wer
                    ));
                }
            }
        }
        out.push_str(&format!("\nsentences with different selections: {}\n", self.changed_sentences));
        for w in &self.word_changes {
            out.push_str(&format!(
                "WER {:<9} sentences {:>4}  changed words {:>5}  function words {:>5} ({:.1}%)\n",
                w.wer_change,
                w.sentences,
                w.changed_words,
                w.function_words,
                100.0 * w.function_share
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn changed_words_are_unmatched_on_both_sides() {
        let got = changed_words(&s(&["i", "mean", "that", "s", "better"]), &s(&["i", "mean", "that", "is", "better"]));
        assert_eq!(got, s(&["s", "is"]));
        assert!(changed_words(&s(&["a", "b"]), &s(&["A", "b"])).is_empty());
    }

    #[test]
    fn default_list_loads() {
        let fw = load_function_words(None).unwrap();
        assert!(fw.contains("the") && !fw.contains("music"));
    }
}
