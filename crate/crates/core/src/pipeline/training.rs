//! Grid-searched training of one ranker per objective.

use std::path::Path;

use rayon::prelude::*;

use super::scoring::{evaluate_selections, ScoredSentence};
use super::{read_file, write_file, PipelineError};
use crate::features::FeaturePreset;
use crate::ranker::{
    build_pairs, train, ClassifierKind, PairConfig, PairSample, RankerModel, RankingMethod, TrainConfig, C_GRID, GRID_SEEDS,
};
use crate::sparseval::Objective;

#[derive(Debug, Clone)]
pub struct GridConfig {
    pub kind: ClassifierKind,
    pub c_grid: Vec<f64>,
    pub presets: Vec<FeaturePreset>,
    /// Pair-sampling seeds; one grid cell per seed.
    pub seeds: Vec<u64>,
    /// Ranking method used to evaluate cells on the dev corpus.
    pub method: RankingMethod,
    pub epochs: usize,
    pub learning_rate: f64,
    pub pairs: PairConfig,
}

impl GridConfig {
    /// The standard grid with `GRID_SEEDS` consecutive seeds from `seed`.
    pub fn standard(seed: u64) -> Self {
        GridConfig {
            kind: ClassifierKind::Logistic,
            c_grid: C_GRID.to_vec(),
            presets: FeaturePreset::ALL.to_vec(),
            seeds: (0..GRID_SEEDS as u64).map(|k| seed.wrapping_add(k)).collect(),
            method: RankingMethod::Pointwise,
            epochs: 500,
            learning_rate: 1.0,
            pairs: PairConfig::default(),
        }
    }

    pub fn cells_per_objective(&self) -> usize {
        self.c_grid.len() * self.seeds.len() * self.presets.len()
    }
}

/// One trained and evaluated grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub objective: Objective,
    pub preset: FeaturePreset,
    pub seed: u64,
    pub c: f64,
    pub train_pairs: usize,
    pub train_accuracy: f64,
    pub dev_f1: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Best model per objective, in [`Objective::ALL`] order.
    pub models: Vec<RankerModel>,
    pub log: Vec<GridCell>,
}

fn training_pairs(
    sentences: &[ScoredSentence],
    objective: Objective,
    preset: FeaturePreset,
    seed: u64,
    config: &PairConfig,
) -> Result<Vec<PairSample>, PipelineError> {
    let per_sentence: Vec<Vec<PairSample>> = sentences
        .par_iter()
        .map(|s| {
            build_pairs(&s.set, objective, preset, seed, config)
                .map_err(|e| PipelineError::Scoring { id: s.set.id.clone(), message: e.to_string() })
        })
        .collect::<Result<_, _>>()?;
    Ok(per_sentence.into_iter().flatten().collect())
}

fn dev_f1(model: &RankerModel, dev: &[ScoredSentence], method: RankingMethod, objective: Objective) -> Result<f64, PipelineError> {
    let k = objective.index();
    let mut selections = Vec::with_capacity(dev.len());
    for s in dev {
        let chosen = method
            .select_rows(model, s.features(model.preset))
            .map_err(|e| PipelineError::Scoring { id: s.set.id.clone(), message: e.to_string() })?;
        let mut sel = [0usize; 4];
        sel[k] = chosen;
        selections.push(sel);
    }
    Ok(evaluate_selections(dev, &selections)[k].f1.f1)
}

/// Trains one ranker per objective, choosing preset, seed and C by the dev
/// corpus F1 of that objective. Ties keep the earliest cell in
/// (preset, seed, C) grid order.
pub fn train_rankers(train_set: &[ScoredSentence], dev: &[ScoredSentence], grid: &GridConfig) -> Result<TrainOutcome, PipelineError> {
    if train_set.is_empty() {
        return Err(PipelineError::EmptyCorpus("training corpus".into()));
    }
    if dev.is_empty() {
        return Err(PipelineError::EmptyCorpus("dev corpus".into()));
    }
    if grid.c_grid.is_empty() || grid.presets.is_empty() || grid.seeds.is_empty() {
        return Err(PipelineError::Config("grid has no cells".into()));
    }
    let mut models = Vec::new();
    let mut log = Vec::new();
    for objective in Objective::ALL {
        let mut combos = Vec::new();
        for &preset in &grid.presets {
            for &seed in &grid.seeds {
                combos.push((preset, seed));
            }
        }
        let pair_sets: Vec<Vec<PairSample>> = combos
            .iter()
            .map(|&(preset, seed)| training_pairs(train_set, objective, preset, seed, &grid.pairs))
            .collect::<Result<_, _>>()?;
        if pair_sets.iter().all(Vec::is_empty) {
            return Err(PipelineError::Training {
                objective: objective.to_string(),
                message: "empty training set: no utterance has two or more hypotheses".into(),
            });
        }
        let jobs: Vec<(usize, f64)> = (0..combos.len()).flat_map(|i| grid.c_grid.iter().map(move |&c| (i, c))).collect();
        let results: Vec<(GridCell, RankerModel)> = jobs
            .par_iter()
            .map(|&(i, c)| {
                let (preset, seed) = combos[i];
                let config = TrainConfig { kind: grid.kind, c, epochs: grid.epochs, learning_rate: grid.learning_rate };
                let model = train(&pair_sets[i], objective, preset, &config)
                    .map_err(|e| PipelineError::Training { objective: objective.to_string(), message: e.to_string() })?;
                let train_accuracy = model.pair_accuracy(&pair_sets[i]).unwrap_or(0.0);
                let dev_f1 = dev_f1(&model, dev, grid.method, objective)?;
                let cell = GridCell { objective, preset, seed, c, train_pairs: pair_sets[i].len(), train_accuracy, dev_f1 };
                Ok((cell, model))
            })
            .collect::<Result<_, PipelineError>>()?;
        let mut best = 0;
        for (i, (cell, _)) in results.iter().enumerate() {
            if cell.dev_f1 > results[best].0.dev_f1 {
                best = i;
            }
        }
        models.push(results[best].1.clone());
        log.extend(results.into_iter().map(|(cell, _)| cell));
    }
    Ok(TrainOutcome { models, log })
}

pub fn grid_log_tsv(log: &[GridCell]) -> String {
    let mut out = String::from("objective\tpreset\tseed\tC\ttrain_pairs\ttrain_accuracy\tdev_f1\n");
    for c in log {
        out.push_str(&format!(
            "{}\t{}\t{}\t{:?}\t{}\t{:.6}\t{:.6}\n",
            c.objective, c.preset, c.seed, c.c, c.train_pairs, c.train_accuracy, c.dev_f1
        ));
    }
    out
}

pub fn model_file_name(objective: Objective) -> String {
    format!("{objective}.model")
}

/// Writes `<objective>.model` files and `grid.tsv` into `dir`.
pub fn save_outcome(dir: &Path, outcome: &TrainOutcome) -> Result<(), PipelineError> {
    for m in &outcome.models {
        write_file(&dir.join(model_file_name(m.objective)), &m.to_text())?;
    }
    write_file(&dir.join("grid.tsv"), &grid_log_tsv(&outcome.log))
}

/// Reads the four `<objective>.model` files from `dir`.
pub fn load_models(dir: &Path) -> Result<Vec<RankerModel>, PipelineError> {
    Objective::ALL
        .iter()
        .map(|&o| {
            let path = dir.join(model_file_name(o));
            let model = RankerModel::from_text(&read_file(&path)?)
                .map_err(|e| PipelineError::Format(format!("{}: {e}", path.display())))?;
            if model.objective != o {
                return Err(PipelineError::Format(format!("{}: model is for {}", path.display(), model.objective)));
            }
            Ok(model)
        })
        .collect()
}
