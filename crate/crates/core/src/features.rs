//! Per-hypothesis ranking features and word-level pause/duration cues.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::treebank::{constituents, count_label, depth, Tree, EDITED};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("tree yields {tree} words but the hypothesis has {words}")]
    YieldMismatch { tree: usize, words: usize },
    #[error("hypothesis has no words")]
    EmptyHypothesis,
    #[error("{words} words but {timings} timings")]
    LengthMismatch { words: usize, timings: usize },
    #[error("word {0} starts before the previous word")]
    NonMonotoneTimings(usize),
    #[error("word {0} has an invalid time interval")]
    InvalidTiming(usize),
    #[error("duration stats line {line}: {message}")]
    DurationStats { line: usize, message: String },
}

/// Feature names in schema order.
pub const FEATURE_NAMES: [&str; 12] = [
    "length",
    "parse_score_raw",
    "parse_score_norm",
    "asr_score_raw",
    "asr_score_norm",
    "edited_count",
    "depth",
    "total_constituents",
    "intj_count",
    "np_count",
    "vp_count",
    "pp_count",
];

pub const NUM_FEATURES: usize = FEATURE_NAMES.len();

/// The full feature vector of one hypothesis, in [`FEATURE_NAMES`] order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SentenceFeatures(pub [f64; NUM_FEATURES]);

impl SentenceFeatures {
    pub fn get(&self, name: &str) -> Option<f64> {
        FEATURE_NAMES.iter().position(|n| *n == name).map(|i| self.0[i])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Computes the full schema for a parsed hypothesis.
pub fn parse_features(tree: &Tree, parse_score: f64, asr_score: f64, n_words: usize) -> Result<SentenceFeatures, FeatureError> {
    if n_words == 0 {
        return Err(FeatureError::EmptyHypothesis);
    }
    let yield_len = tree.yield_len();
    if yield_len != n_words {
        return Err(FeatureError::YieldMismatch { tree: yield_len, words: n_words });
    }
    let len = n_words as f64;
    let count = |label: &str| count_label(tree, label) as f64;
    Ok(SentenceFeatures([
        len,
        parse_score,
        parse_score / len,
        asr_score,
        asr_score / len,
        count(EDITED),
        depth(tree) as f64,
        constituents(tree, false, true).len() as f64,
        count("INTJ"),
        count("NP"),
        count("VP"),
        count("PP"),
    ]))
}

/// Named feature subsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeaturePreset {
    /// Normalized parse score, raw ASR score, length and EDITED count.
    Core,
    CoreDepth,
    CoreConstituents,
    CoreDepthConstituents,
    Full,
}

impl FeaturePreset {
    pub const ALL: [FeaturePreset; 5] = [
        FeaturePreset::Core,
        FeaturePreset::CoreDepth,
        FeaturePreset::CoreConstituents,
        FeaturePreset::CoreDepthConstituents,
        FeaturePreset::Full,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            FeaturePreset::Core => "core",
            FeaturePreset::CoreDepth => "core+depth",
            FeaturePreset::CoreConstituents => "core+Nc",
            FeaturePreset::CoreDepthConstituents => "core+depth+Nc",
            FeaturePreset::Full => "full",
        }
    }

    pub fn mask(&self) -> [bool; NUM_FEATURES] {
        let mut m = [false; NUM_FEATURES];
        for name in ["length", "parse_score_norm", "asr_score_raw", "edited_count"] {
            m[index_of(name)] = true;
        }
        match self {
            FeaturePreset::Core => {}
            FeaturePreset::CoreDepth => m[index_of("depth")] = true,
            FeaturePreset::CoreConstituents => m[index_of("total_constituents")] = true,
            FeaturePreset::CoreDepthConstituents => {
                m[index_of("depth")] = true;
                m[index_of("total_constituents")] = true;
            }
            FeaturePreset::Full => m = [true; NUM_FEATURES],
        }
        m
    }

    pub fn arity(&self) -> usize {
        self.mask().iter().filter(|&&b| b).count()
    }

    /// Names of the selected features, in schema order.
    pub fn feature_names(&self) -> Vec<&'static str> {
        FEATURE_NAMES.iter().zip(self.mask()).filter(|(_, m)| *m).map(|(n, _)| *n).collect()
    }
}

fn index_of(name: &str) -> usize {
    FEATURE_NAMES.iter().position(|n| *n == name).unwrap()
}

impl fmt::Display for FeaturePreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeaturePreset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        FeaturePreset::ALL
            .iter()
            .copied()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown feature preset `{s}`"))
    }
}

impl Serialize for FeaturePreset {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for FeaturePreset {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Projects a full vector (or an already masked one of full length) onto the preset.
pub fn apply_preset(features: &SentenceFeatures, preset: FeaturePreset) -> Vec<f64> {
    features.0.iter().zip(preset.mask()).filter(|(_, m)| *m).map(|(v, _)| *v).collect()
}

/// Start and end time of a recognized word, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WordTiming {
    pub start: f64,
    pub end: f64,
}

/// Mean word durations by case-folded word type.
#[derive(Debug, Clone, PartialEq)]
pub struct DurationStats {
    means: HashMap<String, f64>,
    global_mean: f64,
}

const GLOBAL_KEY: &str = "__global__";

impl DurationStats {
    pub fn new(means: HashMap<String, f64>, global_mean: f64) -> Result<Self, FeatureError> {
        let bad = |message: String| FeatureError::DurationStats { line: 0, message };
        if !(global_mean > 0.0 && global_mean.is_finite()) {
            return Err(bad(format!("global mean {global_mean} must be positive")));
        }
        if let Some((w, m)) = means.iter().find(|(_, m)| !(**m > 0.0 && m.is_finite())) {
            return Err(bad(format!("mean for `{w}` is {m}")));
        }
        let means = means.into_iter().map(|(w, m)| (w.to_lowercase(), m)).collect();
        Ok(DurationStats { means, global_mean })
    }

    /// Mean per type from `(word, duration)` observations; the global mean is
    /// over all observations.
    pub fn estimate<'a>(observations: impl IntoIterator<Item = (&'a str, f64)>) -> Result<Self, FeatureError> {
        let mut sums: HashMap<String, (f64, usize)> = HashMap::new();
        let (mut total, mut count) = (0.0, 0usize);
        for (w, d) in observations {
            let e = sums.entry(w.to_lowercase()).or_insert((0.0, 0));
            e.0 += d;
            e.1 += 1;
            total += d;
            count += 1;
        }
        if count == 0 {
            return Err(FeatureError::DurationStats { line: 0, message: "no observations".into() });
        }
        let means = sums.into_iter().map(|(w, (s, c))| (w, s / c as f64)).collect();
        DurationStats::new(means, total / count as f64)
    }

    pub fn mean(&self, word: &str) -> f64 {
        self.means.get(&word.to_lowercase()).copied().unwrap_or(self.global_mean)
    }

    pub fn global_mean(&self) -> f64 {
        self.global_mean
    }

    /// Reads `word mean_seconds` lines plus one `__global__ mean_seconds` line.
    pub fn parse(text: &str) -> Result<Self, FeatureError> {
        let mut means = HashMap::new();
        let mut global = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: &str| FeatureError::DurationStats { line: i + 1, message: message.to_string() };
            let mut fields = line.split_whitespace();
            let (Some(word), Some(value), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(err("expected `word mean_seconds`"));
            };
            let value: f64 = value.parse().map_err(|_| err("mean is not a number"))?;
            if !(value > 0.0 && value.is_finite()) {
                return Err(err("mean must be positive"));
            }
            if word == GLOBAL_KEY {
                global = Some(value);
            } else {
                means.insert(word.to_lowercase(), value);
            }
        }
        let global = global.ok_or(FeatureError::DurationStats { line: 0, message: "missing __global__ line".into() })?;
        DurationStats::new(means, global)
    }

    /// Text form, sorted by word, global line last.
    pub fn to_text(&self) -> String {
        let mut words: Vec<_> = self.means.iter().collect();
        words.sort_by(|a, b| a.0.cmp(b.0));
        let mut out = String::new();
        for (w, m) in words {
            out.push_str(&format!("{w} {m}\n"));
        }
        out.push_str(&format!("{GLOBAL_KEY} {}\n", self.global_mean));
        out
    }
}

/// Pause before, pause after and normalized duration of one word.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProsodicCues {
    pub pause_before: f64,
    pub pause_after: f64,
    pub normalized_duration: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PauseDurationFeatures {
    pub words: Vec<ProsodicCues>,
    /// Number of overlapping word pairs whose negative pause was clamped to 0.
    pub clamped_pauses: usize,
}

/// Pause and duration cues from word timings.
///
/// Pauses at utterance boundaries are 0. Overlapping neighbours give a pause
/// of 0 and are counted in `clamped_pauses`.
pub fn pause_duration_features<S: AsRef<str>>(
    words: &[S],
    timings: &[WordTiming],
    stats: &DurationStats,
) -> Result<PauseDurationFeatures, FeatureError> {
    if words.len() != timings.len() || words.is_empty() {
        return Err(FeatureError::LengthMismatch { words: words.len(), timings: timings.len() });
    }
    for (i, t) in timings.iter().enumerate() {
        if !(t.start >= 0.0 && t.end > t.start && t.end.is_finite()) {
            return Err(FeatureError::InvalidTiming(i));
        }
        if i > 0 && t.start < timings[i - 1].start {
            return Err(FeatureError::NonMonotoneTimings(i));
        }
    }
    let mut clamped_pauses = 0;
    let gaps: Vec<f64> = timings
        .windows(2)
        .map(|w| {
            let gap = w[1].start - w[0].end;
            if gap < 0.0 {
                clamped_pauses += 1;
                0.0
            } else {
                gap
            }
        })
        .collect();
    let cues = words
        .iter()
        .zip(timings)
        .enumerate()
        .map(|(i, (w, t))| ProsodicCues {
            pause_before: if i == 0 { 0.0 } else { gaps[i - 1] },
            pause_after: gaps.get(i).copied().unwrap_or(0.0),
            normalized_duration: (t.end - t.start) / stats.mean(w.as_ref()),
        })
        .collect();
    Ok(PauseDurationFeatures { words: cues, clamped_pauses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::parse_ptb;

    #[test]
    fn example_features() {
        let t = parse_ptb("(S (NP (PRP i)) (VP (VBP like) (NP (NN music))))").unwrap();
        let f = parse_features(&t, -6.0, -12.0, 3).unwrap();
        assert_eq!(f.0, [3.0, -6.0, -2.0, -12.0, -4.0, 0.0, 4.0, 4.0, 0.0, 2.0, 1.0, 0.0]);
        assert_eq!(f.get("np_count"), Some(2.0));
    }

    #[test]
    fn edited_is_counted() {
        let t = parse_ptb("(S (EDITED (NP (PRP i))) (NP (PRP i)) (VP (VBP go)))").unwrap();
        let f = parse_features(&t, 0.0, 0.0, 3).unwrap();
        assert_eq!(f.get("edited_count"), Some(1.0));
        assert_eq!(f.get("total_constituents"), Some(5.0));
    }

    #[test]
    fn yield_mismatch() {
        let t = parse_ptb("(X a)").unwrap();
        assert_eq!(parse_features(&t, 0.0, 0.0, 2), Err(FeatureError::YieldMismatch { tree: 1, words: 2 }));
    }

    #[test]
    fn presets() {
        let f = SentenceFeatures([1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0]);
        assert_eq!(apply_preset(&f, FeaturePreset::Full), f.0.to_vec());
        assert_eq!(apply_preset(&f, FeaturePreset::Core), vec![1.0, 3.0, 4.0, 6.0]);
        assert_eq!(FeaturePreset::Core.feature_names(), vec!["length", "parse_score_norm", "asr_score_raw", "edited_count"]);
        let arities: Vec<usize> = FeaturePreset::ALL.iter().map(|p| p.arity()).collect();
        assert_eq!(arities, vec![4, 5, 5, 6, 12]);
        for p in FeaturePreset::ALL {
            assert_eq!(p.name().parse::<FeaturePreset>().unwrap(), p);
        }
    }

    #[test]
    fn pause_fixture() {
        let stats = DurationStats::new([("a".to_string(), 0.5), ("b".to_string(), 0.6)].into(), 0.4).unwrap();
        let timings = [WordTiming { start: 0.0, end: 0.5 }, WordTiming { start: 0.7, end: 1.0 }];
        let f = pause_duration_features(&["a", "b"], &timings, &stats).unwrap();
        let close = |x: f64, y: f64| (x - y).abs() < 1e-12;
        assert!(close(f.words[0].pause_before, 0.0) && close(f.words[0].pause_after, 0.2));
        assert!(close(f.words[0].normalized_duration, 1.0));
        assert!(close(f.words[1].pause_before, 0.2) && close(f.words[1].pause_after, 0.0));
        assert!(close(f.words[1].normalized_duration, 0.5));
        assert_eq!(f.clamped_pauses, 0);
    }

    #[test]
    fn pause_edge_cases() {
        let stats = DurationStats::new(HashMap::new(), 0.4).unwrap();
        let one = pause_duration_features(&["zzz"], &[WordTiming { start: 1.0, end: 1.4 }], &stats).unwrap();
        assert_eq!((one.words[0].pause_before, one.words[0].pause_after), (0.0, 0.0));
        assert!((one.words[0].normalized_duration - 1.0).abs() < 1e-12);

        let overlap = [WordTiming { start: 0.0, end: 0.5 }, WordTiming { start: 0.4, end: 0.9 }];
        let f = pause_duration_features(&["a", "b"], &overlap, &stats).unwrap();
        assert_eq!((f.words[0].pause_after, f.clamped_pauses), (0.0, 1));

        let backwards = [WordTiming { start: 0.5, end: 0.9 }, WordTiming { start: 0.1, end: 0.2 }];
        assert_eq!(pause_duration_features(&["a", "b"], &backwards, &stats), Err(FeatureError::NonMonotoneTimings(1)));
        assert!(matches!(pause_duration_features(&["a"], &overlap, &stats), Err(FeatureError::LengthMismatch { .. })));
        let inverted = [WordTiming { start: 0.5, end: 0.5 }];
        assert_eq!(pause_duration_features(&["a"], &inverted, &stats), Err(FeatureError::InvalidTiming(0)));
    }

    #[test]
    fn duration_stats_file() {
        let s = DurationStats::parse("the 0.12\nUh 0.3\n__global__ 0.25\n").unwrap();
        assert_eq!(s.mean("THE"), 0.12);
        assert_eq!(s.mean("uh"), 0.3);
        assert_eq!(s.mean("music"), 0.25);
        assert_eq!(DurationStats::parse(&s.to_text()).unwrap(), s);
        assert!(DurationStats::parse("the 0.1\n").is_err());
        assert!(DurationStats::parse("the -1\n__global__ 1\n").is_err());
        let est = DurationStats::estimate([("a", 0.2), ("a", 0.4), ("b", 0.6)]).unwrap();
        assert!((est.mean("a") - 0.3).abs() < 1e-12);
        assert!((est.global_mean() - 0.4).abs() < 1e-12);
    }
}
