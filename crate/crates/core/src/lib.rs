//! Parse-quality reranking of N-best speech recognition hypotheses.
//!
//! The crate scores parsed hypotheses against gold trees through a word
//! alignment, decodes span-score charts into trees, extracts ranking
//! features, and trains pairwise rankers that select one hypothesis per
//! utterance.

pub mod alignment;
pub mod chartdec;
pub mod features;
pub mod pipeline;
pub mod ranker;
pub mod sparseval;
pub mod synth;
pub mod treebank;
