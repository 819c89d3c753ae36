//! Corpus-level scoring, ranker training, reporting and analysis.
//!
//! Every per-sentence step runs as an ordered parallel map, and all
//! randomness is derived from the global seed and the sentence id, so results
//! do not depend on the worker count.

use std::path::{Path, PathBuf};

use thiserror::Error;

pub mod analysis;
pub mod corpus;
pub mod report;
pub mod scoring;
pub mod spans;
pub mod training;

pub use analysis::{analyze, load_function_words, AnalysisSummary, DEFAULT_FUNCTION_WORDS};
pub use corpus::{ingest, read_corpus, write_corpus, CorpusRecord, HypothesisRecord, Ingested, CORPUS_HEADER};
pub use report::{relative_gain, relative_improvement, report, Report, ReportRow};
pub use scoring::{
    evaluate_selections, prepare_corpus, read_selections, score_corpus, write_selections, HypothesisScores, ScoreTable,
    ScoredSentence, ScoringOptions, Strategy, SystemScores,
};
pub use spans::{read_span_file, write_span_file};
pub use training::{train_rankers, GridCell, GridConfig, TrainOutcome};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: malformed record: {message}")]
    MalformedRecord { path: PathBuf, line: usize, message: String },
    #[error("{0}")]
    Format(String),
    #[error("sentence {id}: {message}")]
    Scoring { id: String, message: String },
    #[error("{objective}: {message}")]
    Training { objective: String, message: String },
    #[error("empty corpus: {0}")]
    EmptyCorpus(String),
    #[error("selection files cover {a} and {b} sentences")]
    SelectionLengthMismatch { a: usize, b: usize },
    #[error("{0}")]
    Config(String),
}

impl PipelineError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        PipelineError::Io { path: path.to_path_buf(), source }
    }

    /// Process exit code for the error category.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Io { .. } => 3,
            PipelineError::MalformedRecord { .. } | PipelineError::Format(_) | PipelineError::SelectionLengthMismatch { .. } => 4,
            PipelineError::Scoring { .. } | PipelineError::EmptyCorpus(_) => 5,
            PipelineError::Training { .. } => 6,
        }
    }

    pub fn category(&self) -> &'static str {
        match self.exit_code() {
            2 => "config",
            3 => "io",
            4 => "format",
            5 => "scoring",
            _ => "training",
        }
    }
}

/// Runs `f` on a pool of `workers` threads (0 = rayon default).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T, PipelineError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| PipelineError::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

pub(crate) fn read_file(path: &Path) -> Result<String, PipelineError> {
    std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| PipelineError::io(path, e))
}
