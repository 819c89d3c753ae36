use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use asr_rerank::chartdec::decode;
use asr_rerank::features::FeaturePreset;
use asr_rerank::pipeline::scoring::per_sentence_tsv;
use asr_rerank::pipeline::training::{load_models, save_outcome};
use asr_rerank::pipeline::{
    analyze, load_function_words, prepare_corpus, read_selections, read_span_file, report, score_corpus,
    train_rankers, with_workers, write_corpus, write_selections, CorpusRecord, GridConfig, PipelineError, Report,
    ScoreTable, ScoredSentence, ScoringOptions,
};
use asr_rerank::ranker::{ClassifierKind, RankingMethod};
use asr_rerank::sparseval::Objective;
use asr_rerank::synth::{generate_corpus, SynthConfig};
use asr_rerank::treebank::{write_ptb, HeadRules};

#[derive(Parser)]
#[command(name = "asr-rerank", version, about = "Score, train and apply parse-based rerankers for N-best ASR output")]
struct Cli {
    /// Worker threads; 0 uses one per core. Output does not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Ingest {
    /// Corpus file (`#asr-rerank-corpus v1` header, one JSON record per line).
    #[arg(long)]
    corpus: PathBuf,
    /// Fail on the first malformed record instead of skipping it.
    #[arg(long)]
    strict: bool,
    /// Score EDITED constituents and dependencies.
    #[arg(long)]
    include_edited: bool,
    /// Score preterminal brackets.
    #[arg(long)]
    include_preterminals: bool,
    /// Head-rule table; the built-in table is used when absent.
    #[arg(long)]
    head_rules: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Point,
    Pair,
}

impl From<Method> for RankingMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Point => RankingMethod::Pointwise,
            Method::Pair => RankingMethod::Pairwise,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Logistic,
    Hinge,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Score every hypothesis and evaluate the selection strategies.
    Score {
        #[command(flatten)]
        ingest: Ingest,
        /// Directory with trained models; adds the ranker systems.
        #[arg(long)]
        models: Option<PathBuf>,
        /// Score table (JSON).
        #[arg(long)]
        output: PathBuf,
        /// Per-sentence scores of every system (TSV).
        #[arg(long)]
        per_sentence: Option<PathBuf>,
    },
    /// Train one ranker per objective with a grid search on a dev corpus.
    TrainRanker {
        #[command(flatten)]
        ingest: Ingest,
        /// Dev corpus used to pick preset, seed and C.
        #[arg(long)]
        dev: PathBuf,
        /// Output directory for `<objective>.model` files and `grid.tsv`.
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_enum, default_value = "logistic")]
        kind: Kind,
        /// Comma-separated C values replacing the standard grid.
        #[arg(long, value_delimiter = ',')]
        c_grid: Option<Vec<f64>>,
        /// Comma-separated feature presets (core, core+depth, core+Nc, core+depth+Nc, full).
        #[arg(long, value_delimiter = ',')]
        presets: Option<Vec<FeaturePreset>>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of pair-sampling seeds, counting up from `--seed`.
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        /// Ranking method used to score grid cells on the dev corpus.
        #[arg(long, value_enum, default_value = "point")]
        method: Method,
        #[arg(long, default_value_t = 500)]
        epochs: usize,
        #[arg(long, default_value_t = 1.0)]
        learning_rate: f64,
    },
    /// Select one hypothesis per sentence with a trained ranker.
    Rerank {
        #[command(flatten)]
        ingest: Ingest,
        #[arg(long)]
        models: PathBuf,
        #[arg(long, default_value = "labeled-brk")]
        objective: Objective,
        #[arg(long, value_enum, default_value = "point")]
        method: Method,
        /// Selections file (`id<TAB>index` lines).
        #[arg(long)]
        output: PathBuf,
    },
    /// Print F1, WER, %Δ and %↕ for a score table.
    Report {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compare two selection files by transcription error and changed words.
    Analyze {
        #[command(flatten)]
        ingest: Ingest,
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// One function word per line; a built-in list is used when absent.
        #[arg(long)]
        function_words: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Decode span-score tables into the best-scoring trees.
    DecodeSpans {
        #[arg(long)]
        input: PathBuf,
        /// One bracketed tree per line; stdout when absent.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Write a synthetic corpus.
    Synth {
        #[arg(long, default_value_t = 200)]
        sentences: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Stddev of the score noise, in errors.
        #[arg(long, default_value_t = 0.5)]
        noise: f64,
        #[arg(long)]
        output: PathBuf,
    },
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), PipelineError> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
            }
            std::fs::write(p, text).map_err(|e| PipelineError::io(p, e))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn options(ingest: &Ingest) -> Result<ScoringOptions, PipelineError> {
    let head_rules = match &ingest.head_rules {
        None => HeadRules::default(),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| PipelineError::io(p, e))?;
            HeadRules::parse(&text).map_err(|e| PipelineError::Format(format!("{}: {e}", p.display())))?
        }
    };
    Ok(ScoringOptions { include_edited: ingest.include_edited, include_preterminals: ingest.include_preterminals, head_rules })
}

fn load(path: &Path, ingest: &Ingest, options: &ScoringOptions) -> Result<Vec<ScoredSentence>, PipelineError> {
    let loaded = asr_rerank::pipeline::ingest(path, ingest.strict)?;
    for (line, message) in &loaded.skipped {
        eprintln!("warning: {}:{line}: skipped: {message}", path.display());
    }
    if loaded.records.is_empty() {
        return Err(PipelineError::EmptyCorpus(path.display().to_string()));
    }
    prepare_corpus(&loaded.records, options)
}

fn selections_by_id(path: &Path, sentences: &[ScoredSentence]) -> Result<Vec<usize>, PipelineError> {
    let map: HashMap<String, usize> = read_selections(path)?.into_iter().collect();
    sentences
        .iter()
        .map(|s| {
            map.get(&s.set.id)
                .copied()
                .ok_or_else(|| PipelineError::Format(format!("{}: no selection for `{}`", path.display(), s.set.id)))
        })
        .collect()
}

fn run(command: Command) -> Result<(), PipelineError> {
    match command {
        Command::Score { ingest, models, output, per_sentence } => {
            let opts = options(&ingest)?;
            let sentences = load(&ingest.corpus, &ingest, &opts)?;
            let models = match models {
                Some(dir) => load_models(&dir)?,
                None => Vec::new(),
            };
            let (table, selections) = score_corpus(&sentences, &models, &opts)?;
            emit(Some(&output), &table.to_json())?;
            if let Some(p) = per_sentence {
                emit(Some(&p), &per_sentence_tsv(&sentences, &selections))?;
            }
        }
        Command::TrainRanker { ingest, dev, output, kind, c_grid, presets, seed, seeds, method, epochs, learning_rate } => {
            let opts = options(&ingest)?;
            let train_set = load(&ingest.corpus, &ingest, &opts)?;
            let dev_set = load(&dev, &ingest, &opts)?;
            let mut grid = GridConfig::standard(seed);
            grid.kind = match kind {
                Kind::Logistic => ClassifierKind::Logistic,
                Kind::Hinge => ClassifierKind::Hinge,
            };
            if let Some(c) = c_grid {
                if c.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                    return Err(PipelineError::Config("C values must be positive and finite".into()));
                }
                grid.c_grid = c;
            }
            if let Some(p) = presets {
                grid.presets = p;
            }
            grid.seeds = (0..seeds).map(|k| seed.wrapping_add(k)).collect();
            grid.method = method.into();
            grid.epochs = epochs;
            grid.learning_rate = learning_rate;
            let outcome = train_rankers(&train_set, &dev_set, &grid)?;
            save_outcome(&output, &outcome)?;
        }
        Command::Rerank { ingest, models, objective, method, output } => {
            let opts = options(&ingest)?;
            let sentences = load(&ingest.corpus, &ingest, &opts)?;
            let models = load_models(&models)?;
            let model = asr_rerank::pipeline::scoring::model_for(&models, objective)?;
            let method: RankingMethod = method.into();
            let chosen = sentences
                .iter()
                .map(|s| {
                    method
                        .select_rows(model, s.features(model.preset))
                        .map_err(|e| PipelineError::Scoring { id: s.set.id.clone(), message: e.to_string() })
                })
                .collect::<Result<Vec<_>, _>>()?;
            let ids: Vec<&str> = sentences.iter().map(|s| s.set.id.as_str()).collect();
            write_selections(&output, &ids, &chosen)?;
        }
        Command::Report { scores, format, output } => {
            let text = std::fs::read_to_string(&scores).map_err(|e| PipelineError::io(&scores, e))?;
            let table = ScoreTable::from_json(&text)?;
            let r: Report = report(&table)?;
            let out = match format {
                Format::Text => r.to_text(),
                Format::Json => r.to_json(),
            };
            emit(output.as_deref(), &out)?;
        }
        Command::Analyze { ingest, a, b, function_words, format, output } => {
            let opts = options(&ingest)?;
            let sentences = load(&ingest.corpus, &ingest, &opts)?;
            let sel_a = selections_by_id(&a, &sentences)?;
            let sel_b = selections_by_id(&b, &sentences)?;
            let fw = load_function_words(function_words.as_deref())?;
            let name = |p: &Path| p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned());
            let summary = analyze(&sentences, (&name(&a), &sel_a), (&name(&b), &sel_b), &fw)?;
            let out = match format {
                Format::Text => summary.to_text(),
                Format::Json => summary.to_json(),
            };
            emit(output.as_deref(), &out)?;
        }
        Command::DecodeSpans { input, output } => {
            let tables = read_span_file(&input)?;
            let mut out = String::new();
            for (i, t) in tables.iter().enumerate() {
                let tree = decode(t).map_err(|e| PipelineError::Scoring { id: format!("block {}", i + 1), message: e.to_string() })?;
                out.push_str(&write_ptb(&tree));
                out.push('\n');
            }
            emit(output.as_deref(), &out)?;
        }
        Command::Synth { sentences, seed, noise, output } => {
            if !(noise >= 0.0 && noise.is_finite()) {
                return Err(PipelineError::Config("noise must be a finite non-negative number".into()));
            }
            let config = SynthConfig { sentences, score_noise: noise, ..SynthConfig::default() };
            let records: Vec<CorpusRecord> = generate_corpus(&config, seed);
            write_corpus(&output, &records)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = with_workers(cli.workers, || run(cli.command)).and_then(|r| r);
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
