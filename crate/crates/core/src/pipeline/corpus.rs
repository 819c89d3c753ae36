//! Line-oriented corpus files.
//!
//! The first line is the header `#asr-rerank-corpus v1`; every following
//! non-empty line is one JSON object:
//!
//! ```text
//! {"id":"sw4019-17","gold":"(S ...)","transcription_error":true,
//!  "hypotheses":[{"words":["i","like"],"asr_score":-12.5,"parse":"(S ...)",
//!                 "parse_score":-3.1,"timings":[{"start":0.0,"end":0.2}, ...]}]}
//! ```
//!
//! Hypotheses are listed in recognizer rank order. `timings` is optional.
//! When `transcription_error` is omitted it is derived by comparing the
//! 1-best words with the gold yield (case-folded).

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_file, write_file, PipelineError};
use crate::features::WordTiming;
use crate::ranker::{Hypothesis, HypothesisSet, MAX_HYPOTHESES};
use crate::treebank::{parse_ptb, Tree};

pub const CORPUS_HEADER: &str = "#asr-rerank-corpus v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypothesisRecord {
    pub words: Vec<String>,
    pub asr_score: f64,
    pub parse: String,
    pub parse_score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<Vec<WordTiming>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusRecord {
    pub id: String,
    pub gold: String,
    #[serde(default)]
    pub transcription_error: Option<bool>,
    pub hypotheses: Vec<HypothesisRecord>,
}

impl CorpusRecord {
    pub fn has_transcription_error(&self) -> bool {
        self.transcription_error.unwrap_or_else(|| {
            let gold = parse_ptb(&self.gold).map(|t| fold(&t.words())).unwrap_or_default();
            self.hypotheses.first().is_none_or(|h| fold(&h.words) != gold)
        })
    }

    /// Parses the trees and checks the record's invariants.
    pub fn to_hypothesis_set(&self) -> Result<HypothesisSet, String> {
        if self.hypotheses.is_empty() || self.hypotheses.len() > MAX_HYPOTHESES {
            return Err(format!("{} hypotheses (allowed 1..={MAX_HYPOTHESES})", self.hypotheses.len()));
        }
        let gold = parse_ptb(&self.gold).map_err(|e| format!("gold tree: {e}"))?;
        let mut hypotheses = Vec::with_capacity(self.hypotheses.len());
        for (i, h) in self.hypotheses.iter().enumerate() {
            let parse: Tree = parse_ptb(&h.parse).map_err(|e| format!("hypothesis {i} parse: {e}"))?;
            if h.words.is_empty() {
                return Err(format!("hypothesis {i} has no words"));
            }
            let yield_words = parse.words();
            if yield_words.len() != h.words.len() || yield_words.iter().zip(&h.words).any(|(a, b)| *a != b) {
                return Err(format!("hypothesis {i}: parse yield does not match words"));
            }
            if let Some(t) = &h.timings {
                if t.len() != h.words.len() {
                    return Err(format!("hypothesis {i}: {} timings for {} words", t.len(), h.words.len()));
                }
            }
            if !h.asr_score.is_finite() || !h.parse_score.is_finite() {
                return Err(format!("hypothesis {i}: non-finite score"));
            }
            let mut hyp = Hypothesis::new(h.words.clone(), h.asr_score, parse, h.parse_score);
            hyp.timings = h.timings.clone();
            hypotheses.push(hyp);
        }
        HypothesisSet::new(self.id.clone(), gold, hypotheses).map_err(|e| e.to_string())
    }

    /// Canonical form: the transcription flag made explicit.
    pub fn canonical(mut self) -> Self {
        self.transcription_error = Some(self.has_transcription_error());
        self
    }
}

fn fold<S: AsRef<str>>(words: &[S]) -> Vec<String> {
    words.iter().map(|w| w.as_ref().to_lowercase()).collect()
}

/// Records read from a corpus file, with diagnostics for skipped lines.
#[derive(Debug, Clone, Default)]
pub struct Ingested {
    pub records: Vec<CorpusRecord>,
    /// `(line number, message)` for every skipped line.
    pub skipped: Vec<(usize, String)>,
}

/// Reads and validates a corpus file. In strict mode the first malformed
/// line is an error; otherwise malformed lines are skipped and reported.
pub fn ingest(path: &Path, strict: bool) -> Result<Ingested, PipelineError> {
    let text = read_file(path)?;
    parse_corpus(&text, path, strict)
}

pub(crate) fn parse_corpus(text: &str, path: &Path, strict: bool) -> Result<Ingested, PipelineError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CORPUS_HEADER => {}
        _ => {
            return Err(PipelineError::MalformedRecord {
                path: path.to_path_buf(),
                line: 1,
                message: format!("missing `{CORPUS_HEADER}` header"),
            })
        }
    }
    let mut out = Ingested::default();
    let mut seen = HashSet::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<CorpusRecord>(line)
            .map_err(|e| e.to_string())
            .and_then(|r| r.to_hypothesis_set().map(|_| r))
            .and_then(|r| if seen.insert(r.id.clone()) { Ok(r) } else { Err(format!("duplicate id `{}`", r.id)) });
        match parsed {
            Ok(r) => out.records.push(r.canonical()),
            Err(message) if strict => {
                return Err(PipelineError::MalformedRecord { path: path.to_path_buf(), line: i + 1, message })
            }
            Err(message) => out.skipped.push((i + 1, message)),
        }
    }
    Ok(out)
}

/// Strict ingestion that also rejects an empty file.
pub fn read_corpus(path: &Path) -> Result<Vec<CorpusRecord>, PipelineError> {
    let records = ingest(path, true)?.records;
    if records.is_empty() {
        return Err(PipelineError::EmptyCorpus(path.display().to_string()));
    }
    Ok(records)
}

pub fn corpus_to_string(records: &[CorpusRecord]) -> String {
    let mut out = String::from(CORPUS_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&serde_json::to_string(&r.clone().canonical()).expect("corpus records serialize"));
        out.push('\n');
    }
    out
}

pub fn write_corpus(path: &Path, records: &[CorpusRecord]) -> Result<(), PipelineError> {
    write_file(path, &corpus_to_string(records))
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOLD: &str = "(S (NP (PRP i)) (VP (VBP like) (NP (NN music))))";

    fn record(id: &str, n_hyps: usize) -> CorpusRecord {
        let hyp = |k: usize| HypothesisRecord {
            words: vec!["i".into(), "like".into(), "music".into()],
            asr_score: -10.0 - k as f64,
            parse: GOLD.into(),
            parse_score: -3.5,
            timings: (k == 0).then(|| {
                vec![
                    WordTiming { start: 0.0, end: 0.2 },
                    WordTiming { start: 0.25, end: 0.5 },
                    WordTiming { start: 0.5, end: 0.9 },
                ]
            }),
        };
        CorpusRecord { id: id.into(), gold: GOLD.into(), transcription_error: None, hypotheses: (0..n_hyps).map(hyp).collect() }
    }

    fn text(records: &[CorpusRecord]) -> String {
        corpus_to_string(records)
    }

    #[test]
    fn reads_two_records() {
        let t = text(&[record("a", 2), record("b", 1)]);
        let got = parse_corpus(&t, Path::new("x"), true).unwrap();
        assert_eq!(got.records.len(), 2);
        assert_eq!(got.records[0].transcription_error, Some(false));
    }

    #[test]
    fn round_trip_is_byte_stable() {
        let t = text(&[record("a", 10)]);
        let got = parse_corpus(&t, Path::new("x"), true).unwrap();
        assert_eq!(got.records[0].hypotheses.len(), 10);
        assert_eq!(text(&got.records), t);
    }

    #[test]
    fn zero_hypotheses_is_malformed() {
        let t = text(&[record("a", 0)]);
        let err = parse_corpus(&t, Path::new("x"), true).unwrap_err();
        assert!(matches!(err, PipelineError::MalformedRecord { line: 2, .. }), "{err}");
        let lenient = parse_corpus(&t, Path::new("x"), false).unwrap();
        assert!(lenient.records.is_empty());
        assert_eq!(lenient.skipped.len(), 1);
    }

    #[test]
    fn rejects_bad_lines() {
        let mut bad_yield = record("a", 1);
        bad_yield.hypotheses[0].words.pop();
        let dup = [record("d", 1), record("d", 1)];
        for t in [text(&[bad_yield]), text(&dup), format!("{CORPUS_HEADER}\n{{not json\n"), "no header\n".to_string()] {
            assert!(parse_corpus(&t, Path::new("x"), true).is_err(), "{t}");
        }
        let lenient = parse_corpus(&text(&dup), Path::new("x"), false).unwrap();
        assert_eq!((lenient.records.len(), lenient.skipped.len()), (1, 1));
    }

    #[test]
    fn derives_transcription_error() {
        let mut r = record("a", 1);
        r.hypotheses[0].words[2] = "Music".into();
        r.hypotheses[0].parse = GOLD.replace("music", "Music");
        assert!(!r.has_transcription_error());
        r.hypotheses[0].words[2] = "muse".into();
        assert!(r.has_transcription_error());
        r.transcription_error = Some(false);
        assert!(!r.has_transcription_error());
    }
}
