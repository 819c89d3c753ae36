//! Span-score files for the chart decoder.
//!
//! ```text
//! #asr-rerank-spans v1
//! n 2
//! words w0 w1
//! labels S NP
//! preterminals X X
//! scores 1.0 0.5 -0.2 0.0 0.0 0.0
//!
//! n 1
//! ...
//! ```
//!
//! One block per sentence, blocks separated by blank lines. `scores` holds
//! `|labels| * n(n+1)/2` values, label-major, then by start, then by end:
//! `(l0,0,1) (l0,0,2) .. (l0,0,n) (l0,1,2) .. (l0,n-1,n) (l1,0,1) ..`.
//! The null label is implicit and always scores 0.

use std::path::Path;

use super::{read_file, write_file, PipelineError};
use crate::chartdec::SpanScores;

pub const SPANS_HEADER: &str = "#asr-rerank-spans v1";

fn format_err(path: &Path, line: usize, message: impl std::fmt::Display) -> PipelineError {
    PipelineError::Format(format!("{}:{line}: {message}", path.display()))
}

pub fn parse_span_file(text: &str, path: &Path) -> Result<Vec<SpanScores>, PipelineError> {
    let mut lines = text.lines().enumerate().peekable();
    match lines.next() {
        Some((_, h)) if h.trim() == SPANS_HEADER => {}
        _ => return Err(format_err(path, 1, format!("missing `{SPANS_HEADER}` header"))),
    }
    let mut out = Vec::new();
    loop {
        while lines.peek().is_some_and(|(_, l)| l.trim().is_empty()) {
            lines.next();
        }
        if lines.peek().is_none() {
            break;
        }
        let mut field = |name: &str| -> Result<(usize, Vec<String>), PipelineError> {
            let (i, line) = lines.next().ok_or_else(|| format_err(path, 0, format!("truncated block, missing `{name}`")))?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(name) {
                return Err(format_err(path, i + 1, format!("expected `{name}`")));
            }
            Ok((i + 1, parts.map(str::to_string).collect()))
        };
        let (ln, n) = field("n")?;
        let n: usize = n
            .first()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| format_err(path, ln, "bad sentence length"))?;
        let (ln, words) = field("words")?;
        if words.len() != n {
            return Err(format_err(path, ln, format!("{} words, n = {n}", words.len())));
        }
        let (_, labels) = field("labels")?;
        let (_, preterminals) = field("preterminals")?;
        let (ln, scores) = field("scores")?;
        let scores = scores
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| format_err(path, ln, format!("bad score `{s}`"))))
            .collect::<Result<Vec<_>, _>>()?;
        out.push(SpanScores::new(labels, preterminals, words, scores).map_err(|e| format_err(path, ln, e))?);
    }
    Ok(out)
}

pub fn read_span_file(path: &Path) -> Result<Vec<SpanScores>, PipelineError> {
    parse_span_file(&read_file(path)?, path)
}

pub fn span_file_to_string(tables: &[SpanScores]) -> String {
    let mut out = String::from(SPANS_HEADER);
    out.push('\n');
    for (i, t) in tables.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&format!("n {}\n", t.len()));
        out.push_str(&format!("words {}\n", t.words().join(" ")));
        out.push_str(&format!("labels {}\n", t.labels().join(" ")));
        out.push_str(&format!("preterminals {}\n", t.preterminals().join(" ")));
        let scores: Vec<String> = t.raw_scores().iter().map(|s| format!("{s:?}")).collect();
        out.push_str(&format!("scores {}\n", scores.join(" ")));
    }
    out
}

pub fn write_span_file(path: &Path, tables: &[SpanScores]) -> Result<(), PipelineError> {
    write_file(path, &span_file_to_string(tables))
}
