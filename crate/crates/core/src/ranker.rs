//! Pairwise ranking of N-best hypotheses with L2-regularized linear classifiers.
//!
//! Training data are feature differences `f_a - f_b` between two hypotheses
//! of the same utterance, labeled 1 when `a` has the higher target F1. At
//! test time a hypothesis is either scored on its own (pointwise: the
//! classifier applied to `f_a`, i.e. `a` paired with an all-zero sentence) or
//! compared head to head in a sequential tournament (pairwise).

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::features::{apply_preset, parse_features, FeatureError, FeaturePreset, WordTiming};
use crate::sparseval::Objective;
use crate::treebank::Tree;

/// Largest N-best list accepted per utterance.
pub const MAX_HYPOTHESES: usize = 10;

const MODEL_HEADER: &str = "asr-rerank-model v1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RankError {
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("expected {expected} features, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("hypothesis {index} has no target F1 for {objective}")]
    MissingTarget { index: usize, objective: Objective },
    #[error("utterance has {0} hypotheses (allowed 1..={MAX_HYPOTHESES})")]
    HypothesisCount(usize),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("model file line {line}: {message}")]
    ModelFormat { line: usize, message: String },
}

/// One recognized candidate with its parse.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub words: Vec<String>,
    /// Log-domain recognizer score.
    pub asr_score: f64,
    pub parse: Tree,
    pub parse_score: f64,
    pub timings: Option<Vec<WordTiming>>,
    /// Sentence-level F1 per objective, indexed by [`Objective::index`].
    pub targets: [Option<f64>; 4],
}

impl Hypothesis {
    pub fn new(words: Vec<String>, asr_score: f64, parse: Tree, parse_score: f64) -> Self {
        Hypothesis { words, asr_score, parse, parse_score, timings: None, targets: [None; 4] }
    }

    pub fn target(&self, objective: Objective) -> Option<f64> {
        self.targets[objective.index()]
    }

    pub fn set_target(&mut self, objective: Objective, f1: f64) {
        self.targets[objective.index()] = Some(f1);
    }

    pub fn features(&self, preset: FeaturePreset) -> Result<Vec<f64>, FeatureError> {
        let f = parse_features(&self.parse, self.parse_score, self.asr_score, self.words.len())?;
        Ok(apply_preset(&f, preset))
    }
}

/// The N-best list of one utterance, in recognizer rank order.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisSet {
    pub id: String,
    pub gold: Tree,
    pub hypotheses: Vec<Hypothesis>,
}

impl HypothesisSet {
    pub fn new(id: impl Into<String>, gold: Tree, hypotheses: Vec<Hypothesis>) -> Result<Self, RankError> {
        if hypotheses.is_empty() || hypotheses.len() > MAX_HYPOTHESES {
            return Err(RankError::HypothesisCount(hypotheses.len()));
        }
        Ok(HypothesisSet { id: id.into(), gold, hypotheses })
    }

    /// Masked feature vectors, one per hypothesis.
    pub fn feature_matrix(&self, preset: FeaturePreset) -> Result<Vec<Vec<f64>>, FeatureError> {
        self.hypotheses.iter().map(|h| h.features(preset)).collect()
    }

    pub fn targets(&self, objective: Objective) -> Result<Vec<f64>, RankError> {
        self.hypotheses
            .iter()
            .enumerate()
            .map(|(index, h)| h.target(objective).ok_or(RankError::MissingTarget { index, objective }))
            .collect()
    }
}

/// A feature difference `f_a - f_b` with label `F1(a) > F1(b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSample {
    pub diff: Vec<f64>,
    pub label: bool,
}

/// How training pairs are drawn from one N-best list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairConfig {
    /// Pairs with the largest F1 difference.
    pub max_diff_pairs: usize,
    /// Further pairs drawn uniformly without replacement.
    pub random_pairs: usize,
    /// Skip pairs whose F1 values are equal.
    pub drop_ties: bool,
}

impl Default for PairConfig {
    fn default() -> Self {
        PairConfig { max_diff_pairs: 1, random_pairs: 10, drop_ties: false }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Generator for per-utterance randomness: depends only on the global seed
/// and the utterance id.
pub fn sentence_rng(seed: u64, sentence_id: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(sentence_id.as_bytes()));
    rng
}

/// Index pairs `(a, b)`, `a < b`, chosen for training: the largest-|dF1|
/// pairs first (ties to the lexicographically smallest), then a seeded random
/// draw from the rest.
pub fn select_pairs(targets: &[f64], config: &PairConfig, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let n = targets.len();
    let mut all: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    if config.drop_ties {
        all.retain(|&(a, b)| targets[a] != targets[b]);
    }
    let mut by_diff: Vec<usize> = (0..all.len()).collect();
    // stable sort keeps lexicographic order among equal differences
    by_diff.sort_by(|&i, &j| {
        let d = |k: usize| (targets[all[k].0] - targets[all[k].1]).abs();
        d(j).total_cmp(&d(i))
    });
    let top: Vec<usize> = by_diff.into_iter().take(config.max_diff_pairs).collect();
    let mut chosen: Vec<(usize, usize)> = top.iter().map(|&i| all[i]).collect();
    let rest: Vec<(usize, usize)> = (0..all.len()).filter(|i| !top.contains(i)).map(|i| all[i]).collect();
    let k = config.random_pairs.min(rest.len());
    let mut picked: Vec<usize> = sample(rng, rest.len(), k).into_vec();
    picked.sort_unstable();
    chosen.extend(picked.into_iter().map(|i| rest[i]));
    chosen
}

/// Training pairs of one utterance, both orientations of every selected pair.
pub fn build_pairs(
    set: &HypothesisSet,
    objective: Objective,
    preset: FeaturePreset,
    seed: u64,
    config: &PairConfig,
) -> Result<Vec<PairSample>, RankError> {
    if set.hypotheses.len() < 2 {
        return Ok(Vec::new());
    }
    let targets = set.targets(objective)?;
    let features = set.feature_matrix(preset)?;
    let mut rng = sentence_rng(seed, &set.id);
    let mut out = Vec::new();
    for (a, b) in select_pairs(&targets, config, &mut rng) {
        out.push(pair_sample(&features[a], &features[b], targets[a], targets[b]));
        out.push(pair_sample(&features[b], &features[a], targets[b], targets[a]));
    }
    Ok(out)
}

/// `(f_a - f_b, F1(a) > F1(b))`.
pub fn pair_sample(fa: &[f64], fb: &[f64], f1_a: f64, f1_b: f64) -> PairSample {
    PairSample { diff: fa.iter().zip(fb).map(|(x, y)| x - y).collect(), label: f1_a > f1_b }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClassifierKind {
    /// Logistic regression.
    Logistic,
    /// Linear SVM (hinge loss).
    Hinge,
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassifierKind::Logistic => "logistic",
            ClassifierKind::Hinge => "hinge",
        })
    }
}

impl FromStr for ClassifierKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "logistic" | "lr" => Ok(ClassifierKind::Logistic),
            "hinge" | "svc" | "svm" => Ok(ClassifierKind::Hinge),
            other => Err(format!("unknown classifier `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub kind: ClassifierKind,
    /// Inverse regularization strength: the penalty is `||w||^2 / C`.
    pub c: f64,
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { kind: ClassifierKind::Logistic, c: 1.0, epochs: 500, learning_rate: 1.0 }
    }
}

/// Regularization grid searched during training.
pub const C_GRID: [f64; 13] = [0.0005, 0.0001, 0.005, 0.001, 0.05, 0.01, 0.5, 0.1, 1.0, 5.0, 10.0, 50.0, 100.0];

/// Number of seeds tried per grid cell.
pub const GRID_SEEDS: usize = 5;

/// Stop when the objective changes by less than this between epochs.
pub const CONVERGENCE_TOL: f64 = 1e-8;

/// Trained classifier with everything needed to score new hypotheses.
#[derive(Debug, Clone, PartialEq)]
pub struct RankerModel {
    pub kind: ClassifierKind,
    pub objective: Objective,
    pub preset: FeaturePreset,
    pub c: f64,
    /// Per-feature `(mean, stddev)`; stddev is 1 for constant features.
    pub standardization: Vec<(f64, f64)>,
    pub weights: Vec<f64>,
    pub bias: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Regularized logistic objective `mean(log(1+e^z) - y z) + ||w||^2 / C`
/// over already standardized rows, with its gradient in `w` and `b`.
pub fn logistic_objective(weights: &[f64], bias: f64, rows: &[Vec<f64>], labels: &[bool], c: f64) -> (f64, Vec<f64>, f64) {
    let n = rows.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; weights.len()];
    let mut grad_b = 0.0;
    for (x, &y) in rows.iter().zip(labels) {
        let z = dot(weights, x) + bias;
        let y = if y { 1.0 } else { 0.0 };
        loss += softplus(z) - y * z;
        let r = sigmoid(z) - y;
        for (g, xi) in grad.iter_mut().zip(x) {
            *g += r * xi;
        }
        grad_b += r;
    }
    let reg: f64 = weights.iter().map(|w| w * w).sum::<f64>() / c;
    for (g, w) in grad.iter_mut().zip(weights) {
        *g = *g / n + 2.0 * w / c;
    }
    (loss / n + reg, grad, grad_b / n)
}

/// Regularized hinge objective `mean(max(0, 1 - s z)) + ||w||^2 / C`, `s = ±1`,
/// with a subgradient.
pub fn hinge_objective(weights: &[f64], bias: f64, rows: &[Vec<f64>], labels: &[bool], c: f64) -> (f64, Vec<f64>, f64) {
    let n = rows.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; weights.len()];
    let mut grad_b = 0.0;
    for (x, &y) in rows.iter().zip(labels) {
        let s = if y { 1.0 } else { -1.0 };
        let margin = s * (dot(weights, x) + bias);
        if margin < 1.0 {
            loss += 1.0 - margin;
            for (g, xi) in grad.iter_mut().zip(x) {
                *g -= s * xi;
            }
            grad_b -= s;
        }
    }
    let reg: f64 = weights.iter().map(|w| w * w).sum::<f64>() / c;
    for (g, w) in grad.iter_mut().zip(weights) {
        *g = *g / n + 2.0 * w / c;
    }
    (loss / n + reg, grad, grad_b / n)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Population mean and stddev per column; constant columns get stddev 1.
pub fn fit_standardization(rows: &[Vec<f64>]) -> Vec<(f64, f64)> {
    let d = rows.first().map_or(0, Vec::len);
    let n = rows.len() as f64;
    (0..d)
        .map(|j| {
            let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            (mean, if sd > 1e-12 { sd } else { 1.0 })
        })
        .collect()
}

fn is_constant(rows: &[Vec<f64>], j: usize) -> bool {
    rows.iter().all(|r| r[j] == rows[0][j])
}

/// Full-batch gradient descent on standardized pair differences.
///
/// Logistic training uses a fixed step bounded by the objective's smoothness
/// constant; hinge training uses a decaying subgradient step and keeps the
/// best iterate. Constant features keep weight 0.
pub fn train(samples: &[PairSample], objective: Objective, preset: FeaturePreset, config: &TrainConfig) -> Result<RankerModel, RankError> {
    if samples.is_empty() {
        return Err(RankError::EmptyTrainingSet);
    }
    if !(config.c > 0.0 && config.c.is_finite()) || !(config.learning_rate > 0.0) {
        return Err(RankError::InvalidConfig(format!("C={} learning_rate={}", config.c, config.learning_rate)));
    }
    let d = preset.arity();
    if let Some(s) = samples.iter().find(|s| s.diff.len() != d) {
        return Err(RankError::ArityMismatch { expected: d, got: s.diff.len() });
    }
    let raw: Vec<Vec<f64>> = samples.iter().map(|s| s.diff.clone()).collect();
    let labels: Vec<bool> = samples.iter().map(|s| s.label).collect();
    let standardization = fit_standardization(&raw);
    let frozen: Vec<bool> = (0..d).map(|j| is_constant(&raw, j)).collect();
    let rows: Vec<Vec<f64>> = raw.iter().map(|r| standardize(r, &standardization)).collect();

    let mut weights = vec![0.0; d];
    let mut bias = 0.0;
    let objective_fn = match config.kind {
        ClassifierKind::Logistic => logistic_objective,
        ClassifierKind::Hinge => hinge_objective,
    };
    let active = frozen.iter().filter(|f| !**f).count() as f64;
    let (smoothness, decay) = match config.kind {
        // sigmoid curvature <= 1/4, rows have unit second moment per column
        ClassifierKind::Logistic => (0.25 * (active + 1.0) + 2.0 / config.c, false),
        ClassifierKind::Hinge => ((active + 1.0) + 2.0 / config.c, true),
    };
    let step0 = config.learning_rate.min(1.0 / smoothness);

    let (mut loss, mut grad, mut grad_b) = objective_fn(&weights, bias, &rows, &labels, config.c);
    let mut best = (loss, weights.clone(), bias);
    for epoch in 0..config.epochs {
        let step = if decay { step0 / ((epoch + 1) as f64).sqrt() } else { step0 };
        for j in 0..d {
            if !frozen[j] {
                weights[j] -= step * grad[j];
            }
        }
        bias -= step * grad_b;
        let prev = loss;
        (loss, grad, grad_b) = objective_fn(&weights, bias, &rows, &labels, config.c);
        if loss < best.0 {
            best = (loss, weights.clone(), bias);
        }
        if (prev - loss).abs() < CONVERGENCE_TOL {
            break;
        }
    }
    let (_, weights, bias) = best;
    Ok(RankerModel { kind: config.kind, objective, preset, c: config.c, standardization, weights, bias })
}

fn standardize(x: &[f64], standardization: &[(f64, f64)]) -> Vec<f64> {
    x.iter().zip(standardization).map(|(v, (m, s))| (v - m) / s).collect()
}

impl RankerModel {
    /// All-zero model: every score is 0.5.
    pub fn zero(kind: ClassifierKind, objective: Objective, preset: FeaturePreset) -> Self {
        let d = preset.arity();
        RankerModel { kind, objective, preset, c: 1.0, standardization: vec![(0.0, 1.0); d], weights: vec![0.0; d], bias: 0.0 }
    }

    pub fn arity(&self) -> usize {
        self.weights.len()
    }

    /// Linear score `w . standardize(x) + b`.
    pub fn margin(&self, x: &[f64]) -> Result<f64, RankError> {
        if x.len() != self.arity() {
            return Err(RankError::ArityMismatch { expected: self.arity(), got: x.len() });
        }
        Ok(dot(&self.weights, &standardize(x, &self.standardization)) + self.bias)
    }

    /// Sigmoid of the margin. For hinge models this is a monotone score,
    /// not a calibrated probability.
    pub fn probability(&self, x: &[f64]) -> Result<f64, RankError> {
        self.margin(x).map(sigmoid)
    }

    /// Fraction of samples whose label agrees with `probability > 0.5`.
    pub fn pair_accuracy(&self, samples: &[PairSample]) -> Result<f64, RankError> {
        if samples.is_empty() {
            return Ok(0.0);
        }
        let mut correct = 0;
        for s in samples {
            if (self.probability(&s.diff)? > 0.5) == s.label {
                correct += 1;
            }
        }
        Ok(correct as f64 / samples.len() as f64)
    }

    pub fn to_text(&self) -> String {
        let join = |xs: &mut dyn Iterator<Item = f64>| xs.map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ");
        let mut out = String::new();
        out.push_str(MODEL_HEADER);
        out.push('\n');
        out.push_str(&format!("kind {}\n", self.kind));
        out.push_str(&format!("objective {}\n", self.objective));
        out.push_str(&format!("preset {}\n", self.preset));
        out.push_str(&format!("C {:?}\n", self.c));
        out.push_str(&format!("features {}\n", self.preset.feature_names().join(" ")));
        out.push_str(&format!("mean {}\n", join(&mut self.standardization.iter().map(|s| s.0))));
        out.push_str(&format!("stddev {}\n", join(&mut self.standardization.iter().map(|s| s.1))));
        out.push_str(&format!("weights {}\n", join(&mut self.weights.iter().copied())));
        out.push_str(&format!("bias {:?}\n", self.bias));
        out
    }

    pub fn from_text(text: &str) -> Result<Self, RankError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let err = |line: usize, message: String| RankError::ModelFormat { line: line + 1, message };
        match lines.next() {
            Some((_, l)) if l.trim() == MODEL_HEADER => {}
            Some((i, l)) => return Err(err(i, format!("unexpected header `{l}`"))),
            None => return Err(err(0, "empty model file".into())),
        }
        let mut field = |name: &str| -> Result<(usize, String), RankError> {
            let (i, line) = lines.next().ok_or_else(|| err(0, format!("missing `{name}` line")))?;
            let rest = line
                .strip_prefix(name)
                .filter(|r| r.is_empty() || r.starts_with(' '))
                .ok_or_else(|| err(i, format!("expected `{name}`")))?;
            Ok((i, rest.trim().to_string()))
        };
        let floats = |i: usize, s: &str| -> Result<Vec<f64>, RankError> {
            s.split_whitespace().map(|t| t.parse::<f64>().map_err(|_| err(i, format!("bad number `{t}`")))).collect()
        };
        let (i, kind) = field("kind")?;
        let kind = kind.parse().map_err(|m| err(i, m))?;
        let (i, objective) = field("objective")?;
        let objective = objective.parse().map_err(|m| err(i, m))?;
        let (i, preset) = field("preset")?;
        let preset: FeaturePreset = preset.parse().map_err(|m| err(i, m))?;
        let (i, c) = field("C")?;
        let c = c.parse().map_err(|_| err(i, format!("bad C `{c}`")))?;
        let (i, names) = field("features")?;
        if names.split_whitespace().collect::<Vec<_>>() != preset.feature_names() {
            return Err(err(i, format!("feature list does not match preset {preset}")));
        }
        let (i, mean) = field("mean")?;
        let mean = floats(i, &mean)?;
        let (i, sd) = field("stddev")?;
        let sd = floats(i, &sd)?;
        let (i, weights) = field("weights")?;
        let weights = floats(i, &weights)?;
        let (i, bias) = field("bias")?;
        let bias = bias.parse().map_err(|_| err(i, format!("bad bias `{bias}`")))?;
        let d = preset.arity();
        if mean.len() != d || sd.len() != d || weights.len() != d {
            return Err(RankError::ArityMismatch { expected: d, got: weights.len() });
        }
        if sd.iter().any(|s| !(*s > 0.0)) {
            return Err(err(i, "stddev entries must be positive".into()));
        }
        Ok(RankerModel { kind, objective, preset, c, standardization: mean.into_iter().zip(sd).collect(), weights, bias })
    }
}

/// `C(x)` for a single masked feature vector.
pub fn score_pointwise(model: &RankerModel, features: &[f64]) -> Result<f64, RankError> {
    model.probability(features)
}

fn first_argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Highest pointwise score over precomputed feature rows; ties to the
/// lowest rank.
pub fn select_pointwise_rows(model: &RankerModel, rows: &[Vec<f64>]) -> Result<usize, RankError> {
    // margins, not probabilities: sigmoid saturation would create false ties
    let margins = rows.iter().map(|r| model.margin(r)).collect::<Result<Vec<_>, _>>()?;
    Ok(first_argmax(&margins))
}

pub fn select_pointwise(model: &RankerModel, set: &HypothesisSet) -> Result<usize, RankError> {
    select_pointwise_rows(model, &set.feature_matrix(model.preset)?)
}

/// Sequential tournament in rank order over precomputed feature rows. The
/// champion survives a comparison when `C(f_champion - f_challenger) >= 0.5`.
pub fn select_pairwise_rows(model: &RankerModel, rows: &[Vec<f64>]) -> Result<usize, RankError> {
    let mut champion = 0;
    for challenger in 1..rows.len() {
        let diff: Vec<f64> = rows[champion].iter().zip(&rows[challenger]).map(|(a, b)| a - b).collect();
        if model.margin(&diff)? < 0.0 {
            champion = challenger;
        }
    }
    Ok(champion)
}

pub fn select_pairwise(model: &RankerModel, set: &HypothesisSet) -> Result<usize, RankError> {
    select_pairwise_rows(model, &set.feature_matrix(model.preset)?)
}

/// Best target F1 in the set; ties to the lowest rank.
pub fn select_oracle(set: &HypothesisSet, objective: Objective) -> Result<usize, RankError> {
    Ok(first_argmax(&set.targets(objective)?))
}

/// Pointwise or pairwise test-time selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RankingMethod {
    Pointwise,
    Pairwise,
}

impl RankingMethod {
    pub fn select_rows(&self, model: &RankerModel, rows: &[Vec<f64>]) -> Result<usize, RankError> {
        match self {
            RankingMethod::Pointwise => select_pointwise_rows(model, rows),
            RankingMethod::Pairwise => select_pairwise_rows(model, rows),
        }
    }
}

impl fmt::Display for RankingMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RankingMethod::Pointwise => "point",
            RankingMethod::Pairwise => "pair",
        })
    }
}

impl FromStr for RankingMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "point" | "pointwise" => Ok(RankingMethod::Pointwise),
            "pair" | "pairwise" => Ok(RankingMethod::Pairwise),
            other => Err(format!("unknown ranking method `{other}`")),
        }
    }
}
