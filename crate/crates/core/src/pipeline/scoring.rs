//! Per-hypothesis scoring against gold trees and corpus evaluation of
//! selection strategies.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::corpus::CorpusRecord;
use super::{read_file, write_file, PipelineError};
use crate::alignment::{wer, word_alignment, EditSummary};
use crate::features::FeaturePreset;
use crate::ranker::{select_oracle, HypothesisSet, RankerModel, RankingMethod};
use crate::sparseval::{corpus_score, score, F1Score, Objective};
use crate::treebank::HeadRules;

pub const SELECTIONS_HEADER: &str = "#asr-rerank-selections v1";

#[derive(Debug, Clone, Default)]
pub struct ScoringOptions {
    pub include_edited: bool,
    pub include_preterminals: bool,
    pub head_rules: HeadRules,
}

/// Scores of one hypothesis against the gold tree.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisScores {
    /// Indexed by [`Objective::index`].
    pub f1: [F1Score; 4],
    pub edits: EditSummary,
}

/// An utterance with every hypothesis scored; targets in `set` are filled.
#[derive(Debug, Clone)]
pub struct ScoredSentence {
    pub set: HypothesisSet,
    pub scores: Vec<HypothesisScores>,
    pub transcription_error: bool,
    /// Cached masked feature rows, per preset in [`FeaturePreset::ALL`] order.
    features: Vec<Vec<Vec<f64>>>,
}

impl ScoredSentence {
    pub fn features(&self, preset: FeaturePreset) -> &[Vec<f64>] {
        let i = FeaturePreset::ALL.iter().position(|p| *p == preset).unwrap();
        &self.features[i]
    }
}

fn scoring_error(id: &str, message: impl fmt::Display) -> PipelineError {
    PipelineError::Scoring { id: id.to_string(), message: message.to_string() }
}

/// Scores one record's hypotheses under all four objectives.
pub fn score_record(record: &CorpusRecord, options: &ScoringOptions) -> Result<ScoredSentence, PipelineError> {
    let mut set = record.to_hypothesis_set().map_err(|m| scoring_error(&record.id, m))?;
    let gold_words = set.gold.words();
    let mut scores = Vec::with_capacity(set.hypotheses.len());
    for hyp in &mut set.hypotheses {
        let align = word_alignment(&gold_words, &hyp.words);
        let mut f1 = [F1Score::zero(); 4];
        for objective in Objective::ALL {
            let config = objective.config(options.include_edited, options.include_preterminals);
            let s = score(&set.gold, &hyp.parse, &align, &options.head_rules, &config).map_err(|e| scoring_error(&record.id, e))?;
            f1[objective.index()] = s;
            hyp.set_target(objective, s.f1);
        }
        let edits = wer(&gold_words, &hyp.words).map_err(|e| scoring_error(&record.id, e))?;
        scores.push(HypothesisScores { f1, edits });
    }
    let features = FeaturePreset::ALL
        .iter()
        .map(|p| set.feature_matrix(*p))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| scoring_error(&record.id, e))?;
    Ok(ScoredSentence { set, scores, transcription_error: record.has_transcription_error(), features })
}

/// Scores every record in parallel, preserving corpus order.
pub fn prepare_corpus(records: &[CorpusRecord], options: &ScoringOptions) -> Result<Vec<ScoredSentence>, PipelineError> {
    records.par_iter().map(|r| score_record(r, options)).collect()
}

/// Hypothesis selection strategies compared in the score table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    OneBest,
    ParseScore,
    Ranker(RankingMethod),
    Oracle,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::OneBest => "1-best",
            Strategy::ParseScore => "parse-score",
            Strategy::Ranker(RankingMethod::Pointwise) => "ranker-point",
            Strategy::Ranker(RankingMethod::Pairwise) => "ranker-pair",
            Strategy::Oracle => "oracle",
        }
    }

    /// Selected hypothesis per objective for one sentence.
    pub fn select(&self, sentence: &ScoredSentence, models: &[RankerModel]) -> Result<[usize; 4], PipelineError> {
        let id = &sentence.set.id;
        let mut out = [0usize; 4];
        for objective in Objective::ALL {
            out[objective.index()] = match self {
                Strategy::OneBest => 0,
                Strategy::ParseScore => {
                    let mut best = 0;
                    for (i, h) in sentence.set.hypotheses.iter().enumerate() {
                        if h.parse_score > sentence.set.hypotheses[best].parse_score {
                            best = i;
                        }
                    }
                    best
                }
                Strategy::Ranker(method) => {
                    let model = model_for(models, objective)?;
                    method.select_rows(model, sentence.features(model.preset)).map_err(|e| scoring_error(id, e))?
                }
                Strategy::Oracle => select_oracle(&sentence.set, objective).map_err(|e| scoring_error(id, e))?,
            };
        }
        Ok(out)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        [
            Strategy::OneBest,
            Strategy::ParseScore,
            Strategy::Ranker(RankingMethod::Pointwise),
            Strategy::Ranker(RankingMethod::Pairwise),
            Strategy::Oracle,
        ]
        .into_iter()
        .find(|st| st.name() == s)
        .ok_or_else(|| format!("unknown strategy `{s}`"))
    }
}

pub fn model_for(models: &[RankerModel], objective: Objective) -> Result<&RankerModel, PipelineError> {
    models
        .iter()
        .find(|m| m.objective == objective)
        .ok_or_else(|| PipelineError::Config(format!("no ranker model for objective {objective}")))
}

/// Corpus word error counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WerCounts {
    pub errors: usize,
    pub reference_words: usize,
    pub wer: f64,
}

impl WerCounts {
    pub fn from_counts(errors: usize, reference_words: usize) -> Self {
        let wer = if reference_words == 0 { 0.0 } else { errors as f64 / reference_words as f64 };
        WerCounts { errors, reference_words, wer }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveScore {
    pub objective: Objective,
    pub f1: F1Score,
    /// WER of the hypotheses selected for this objective.
    pub wer: WerCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemScores {
    pub system: String,
    /// In [`Objective::ALL`] order.
    pub objectives: Vec<ObjectiveScore>,
}

impl SystemScores {
    pub fn f1(&self, objective: Objective) -> f64 {
        self.objectives[objective.index()].f1.f1
    }
}

/// Corpus scores of every strategy; the input of the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub version: u32,
    pub include_edited: bool,
    pub include_preterminals: bool,
    pub sentences: usize,
    pub systems: Vec<SystemScores>,
}

impl ScoreTable {
    pub fn system(&self, name: &str) -> Option<&SystemScores> {
        self.systems.iter().find(|s| s.system == name)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("score table serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        serde_json::from_str(text).map_err(|e| PipelineError::Format(format!("score table: {e}")))
    }
}

/// Micro-averaged F1 and WER of one selection per sentence and objective.
pub fn evaluate_selections(sentences: &[ScoredSentence], selections: &[[usize; 4]]) -> Vec<ObjectiveScore> {
    Objective::ALL
        .iter()
        .map(|&objective| {
            let k = objective.index();
            let chosen: Vec<&HypothesisScores> = sentences.iter().zip(selections).map(|(s, sel)| &s.scores[sel[k]]).collect();
            let f1 = corpus_score(chosen.iter().map(|h| &h.f1[k]));
            let errors = chosen.iter().map(|h| h.edits.errors()).sum();
            let reference_words = chosen.iter().map(|h| h.edits.reference_len).sum();
            ObjectiveScore { objective, f1, wer: WerCounts::from_counts(errors, reference_words) }
        })
        .collect()
}

pub fn select_all(sentences: &[ScoredSentence], strategy: Strategy, models: &[RankerModel]) -> Result<Vec<[usize; 4]>, PipelineError> {
    sentences.par_iter().map(|s| strategy.select(s, models)).collect()
}

/// Selections of one strategy, kept for per-sentence output.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSelections {
    pub strategy: Strategy,
    pub per_sentence: Vec<[usize; 4]>,
}

/// Evaluates 1-best, parse-score and oracle selection, plus both ranker
/// methods when models for all four objectives are given.
pub fn score_corpus(sentences: &[ScoredSentence], models: &[RankerModel], options: &ScoringOptions) -> Result<(ScoreTable, Vec<SystemSelections>), PipelineError> {
    let mut strategies = vec![Strategy::OneBest, Strategy::ParseScore];
    if !models.is_empty() {
        strategies.push(Strategy::Ranker(RankingMethod::Pointwise));
        strategies.push(Strategy::Ranker(RankingMethod::Pairwise));
    }
    strategies.push(Strategy::Oracle);
    let mut systems = Vec::new();
    let mut selections = Vec::new();
    for strategy in strategies {
        let per_sentence = select_all(sentences, strategy, models)?;
        systems.push(SystemScores { system: strategy.name().to_string(), objectives: evaluate_selections(sentences, &per_sentence) });
        selections.push(SystemSelections { strategy, per_sentence });
    }
    let table = ScoreTable {
        version: 1,
        include_edited: options.include_edited,
        include_preterminals: options.include_preterminals,
        sentences: sentences.len(),
        systems,
    };
    Ok((table, selections))
}

/// Tab-separated per-sentence scores of every system and objective.
pub fn per_sentence_tsv(sentences: &[ScoredSentence], selections: &[SystemSelections]) -> String {
    let mut out = String::from("id\tsystem\tobjective\tselected\tmatched\tgold\tpred\tf1\terrors\tref_words\n");
    for (i, s) in sentences.iter().enumerate() {
        for sys in selections {
            for objective in Objective::ALL {
                let k = objective.index();
                let chosen = sys.per_sentence[i][k];
                let h = &s.scores[chosen];
                let f = &h.f1[k];
                out.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{:.6}\t{}\t{}\n",
                    s.set.id,
                    sys.strategy,
                    objective,
                    chosen,
                    f.matched,
                    f.gold_count,
                    f.pred_count,
                    f.f1,
                    h.edits.errors(),
                    h.edits.reference_len
                ));
            }
        }
    }
    out
}

/// Writes `id<TAB>index` lines under the selections header.
pub fn write_selections(path: &Path, ids: &[&str], selections: &[usize]) -> Result<(), PipelineError> {
    let mut out = String::from(SELECTIONS_HEADER);
    out.push('\n');
    for (id, sel) in ids.iter().zip(selections) {
        out.push_str(&format!("{id}\t{sel}\n"));
    }
    write_file(path, &out)
}

pub fn read_selections(path: &Path) -> Result<Vec<(String, usize)>, PipelineError> {
    let text = read_file(path)?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(SELECTIONS_HEADER) {
        return Err(PipelineError::Format(format!("{}: missing `{SELECTIONS_HEADER}` header", path.display())));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let (id, idx) = l
                .split_once('\t')
                .ok_or_else(|| PipelineError::Format(format!("{}: bad selection line `{l}`", path.display())))?;
            let idx = idx
                .trim()
                .parse()
                .map_err(|_| PipelineError::Format(format!("{}: bad index in `{l}`", path.display())))?;
            Ok((id.to_string(), idx))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::corpus::HypothesisRecord;

    const GOLD: &str = "(S (NP (PRP i)) (VP (VBP like) (NP (NN music))))";
    const WORSE: &str = "(S (NP (PRP i)) (VP (VBP like) (NP (DT the) (NN music))))";

    fn hyp(parse: &str, asr: f64, parse_score: f64) -> HypothesisRecord {
        let t = crate::treebank::parse_ptb(parse).unwrap();
        HypothesisRecord {
            words: t.words().iter().map(|w| w.to_string()).collect(),
            asr_score: asr,
            parse: parse.into(),
            parse_score,
            timings: None,
        }
    }

    fn record(id: &str, hyps: Vec<HypothesisRecord>) -> CorpusRecord {
        CorpusRecord { id: id.into(), gold: GOLD.into(), transcription_error: None, hypotheses: hyps }
    }

    #[test]
    fn gold_first_is_perfect() {
        let records = vec![record("a", vec![hyp(GOLD, -1.0, -5.0), hyp(WORSE, -2.0, -1.0)])];
        let opts = ScoringOptions::default();
        let sentences = prepare_corpus(&records, &opts).unwrap();
        let (table, _) = score_corpus(&sentences, &[], &opts).unwrap();
        let one_best = table.system("1-best").unwrap();
        for o in &one_best.objectives {
            assert_eq!(o.f1.f1, 1.0);
            assert_eq!(o.wer.wer, 0.0);
        }
        // the parse score prefers the wrong hypothesis here
        let ps = table.system("parse-score").unwrap();
        assert!(ps.f1(Objective::LABELED_BRACKET) < 1.0);
        assert!((ps.objectives[0].wer.wer - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(table.systems.len(), 3);
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in ["1-best", "parse-score", "ranker-point", "ranker-pair", "oracle"] {
            assert_eq!(s.parse::<Strategy>().unwrap().name(), s);
        }
    }

    #[test]
    fn missing_model_is_config_error() {
        let records = vec![record("a", vec![hyp(GOLD, -1.0, -5.0)])];
        let sentences = prepare_corpus(&records, &ScoringOptions::default()).unwrap();
        let err = Strategy::Ranker(RankingMethod::Pointwise).select(&sentences[0], &[]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn selections_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sel.tsv");
        write_selections(&path, &["a", "b"], &[3, 0]).unwrap();
        assert_eq!(read_selections(&path).unwrap(), vec![("a".to_string(), 3), ("b".to_string(), 0)]);
    }
}
