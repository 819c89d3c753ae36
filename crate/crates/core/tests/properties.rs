use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use asr_rerank::alignment::{wer, word_alignment, AlignmentMap};
use asr_rerank::chartdec::{brute_force_decode, decode, tree_score, SpanScores};
use asr_rerank::features::FeaturePreset;
use asr_rerank::pipeline::report::{relative_gain, relative_improvement};
use asr_rerank::pipeline::{read_corpus, write_corpus};
use asr_rerank::ranker::{pair_sample, select_pairwise_rows, select_pointwise_rows, ClassifierKind, RankerModel};
use asr_rerank::sparseval::{bracket_score, Mode, Objective, ScoreConfig};
use asr_rerank::synth::{generate_corpus, random_tree, random_words, SynthConfig, PHRASE_LABELS};
use asr_rerank::treebank::{constituents, count_label, depth, parse_ptb, write_ptb, Tree, EDITED};

fn tree_from_seed(seed: u64, max_words: usize) -> Tree {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 1 + (seed as usize % max_words);
    let words = random_words(&mut rng, n);
    random_tree(&mut rng, &words, "S", PHRASE_LABELS, 0.15)
}

fn all_internal(t: &Tree, out: &mut Vec<String>) {
    if let Tree::Internal { label, children } = t {
        out.push(label.clone());
        children.iter().for_each(|c| all_internal(c, out));
    }
}

fn depth_by_levels(t: &Tree) -> usize {
    let mut level = vec![t];
    let mut d = 0;
    while level.iter().any(|n| matches!(n, Tree::Internal { .. })) {
        d += 1;
        level = level.iter().flat_map(|n| n.children().iter()).collect();
    }
    d
}

fn words_strategy() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "A", "d"]), 0..12)
        .prop_map(|v| v.into_iter().map(String::from).collect())
}

proptest! {
    #[test]
    fn ptb_round_trip(seed in any::<u64>()) {
        let t = tree_from_seed(seed, 14);
        prop_assert_eq!(parse_ptb(&write_ptb(&t)).unwrap(), t);
    }

    #[test]
    fn constituent_counts(seed in any::<u64>()) {
        let t = tree_from_seed(seed, 14);
        let mut labels = Vec::new();
        all_internal(&t, &mut labels);
        let edited = labels.iter().filter(|l| *l == EDITED).count();
        prop_assert_eq!(constituents(&t, true, true).len(), labels.len());
        prop_assert_eq!(constituents(&t, true, false).len(), labels.len() - edited);
        for c in constituents(&t, false, true) {
            prop_assert!(c.start < c.end && c.end <= t.yield_len());
        }
    }

    #[test]
    fn depth_and_label_counts(seed in any::<u64>()) {
        let t = tree_from_seed(seed, 14);
        prop_assert_eq!(depth(&t), depth_by_levels(&t));
        let mut labels = Vec::new();
        all_internal(&t, &mut labels);
        labels.sort();
        labels.dedup();
        let total: usize = labels.iter().map(|l| count_label(&t, l)).sum();
        prop_assert_eq!(total, t.internal_count());
    }

    #[test]
    fn alignment_is_injective_monotone_and_exact(a in words_strategy(), b in words_strategy()) {
        let m = word_alignment(&a, &b);
        let pairs: Vec<(usize, usize)> = m.iter().collect();
        for w in pairs.windows(2) {
            prop_assert!(w[0].0 < w[1].0 && w[0].1 < w[1].1);
        }
        for (h, g) in pairs {
            prop_assert_eq!(b[h].to_lowercase(), a[g].to_lowercase());
        }
    }

    #[test]
    fn wer_identity_and_renaming(a in words_strategy(), b in words_strategy()) {
        prop_assume!(!a.is_empty());
        prop_assert_eq!(wer(&a, &a).unwrap().errors(), 0);
        let rename = |v: &[String]| v.iter().map(|w| format!("x{}", w.to_lowercase())).collect::<Vec<_>>();
        let e = wer(&a, &b).unwrap();
        let r = wer(&rename(&a), &rename(&b)).unwrap();
        prop_assert_eq!((e.substitutions, e.insertions, e.deletions), (r.substitutions, r.insertions, r.deletions));
        prop_assert!(e.errors() >= a.len().abs_diff(b.len()));
    }

    #[test]
    fn bracket_precision_recall_swap(s1 in any::<u64>(), s2 in any::<u64>(), labeled in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(s1);
        let words = random_words(&mut rng, 1 + (s2 as usize % 9));
        let g = random_tree(&mut rng, &words, "S", PHRASE_LABELS, 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(s2);
        let p = random_tree(&mut rng, &words, "S", PHRASE_LABELS, 0.1);
        let id = AlignmentMap::identity(words.len());
        let cfg = ScoreConfig::new(labeled, Mode::Bracket);
        let gp = bracket_score(&g, &p, &id, &cfg).unwrap();
        let pg = bracket_score(&p, &g, &id, &cfg).unwrap();
        prop_assert_eq!(gp.precision, pg.recall);
        prop_assert_eq!(gp.f1, pg.f1);
        let unlabeled = bracket_score(&g, &p, &id, &ScoreConfig::new(false, Mode::Bracket)).unwrap();
        let labeled_score = bracket_score(&g, &p, &id, &ScoreConfig::new(true, Mode::Bracket)).unwrap();
        prop_assert!(unlabeled.matched >= labeled_score.matched);
    }

    #[test]
    fn decoder_matches_brute_force(seed in any::<u64>(), n in 1usize..6, k in 1usize..4) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<String> = ["S", "A", "B"][..k].iter().map(|s| s.to_string()).collect();
        let words: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
        let table = SpanScores::from_fn(labels, vec!["T".into(); n], words, |_, _, _| rng.gen_range(-1.0..1.0)).unwrap();
        let best = decode(&table).unwrap();
        prop_assert_eq!(decode(&table).unwrap(), best.clone());
        let a = tree_score(&best, &table).unwrap();
        let b = tree_score(&brute_force_decode(&table).unwrap(), &table).unwrap();
        prop_assert!((a - b).abs() <= 1e-9);
        prop_assert_eq!(best.label(), Some(table.labels()[best_root(&table)].as_str()));
    }

    #[test]
    fn pair_features_are_antisymmetric(
        fa in prop::collection::vec(-10.0f64..10.0, 4),
        fb in prop::collection::vec(-10.0f64..10.0, 4),
        f1a in 0.0f64..1.0,
        f1b in 0.0f64..1.0,
    ) {
        let ab = pair_sample(&fa, &fb, f1a, f1b);
        let ba = pair_sample(&fb, &fa, f1b, f1a);
        for (x, y) in ab.diff.iter().zip(&ba.diff) {
            prop_assert_eq!(*x, -*y);
        }
        if f1a != f1b {
            prop_assert_ne!(ab.label, ba.label);
        } else {
            prop_assert!(!ab.label && !ba.label);
        }
    }

    #[test]
    fn pairwise_selection_is_translation_invariant(
        rows in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 4), 1..10),
        weights in prop::collection::vec(-2.0f64..2.0, 4),
        shift in -100.0f64..100.0,
        column in 0usize..4,
    ) {
        let mut model = RankerModel::zero(ClassifierKind::Logistic, Objective::LABELED_BRACKET, FeaturePreset::Core);
        model.weights = weights;
        let shifted: Vec<Vec<f64>> = rows.iter().map(|r| {
            let mut r = r.clone();
            r[column] += shift;
            r
        }).collect();
        prop_assert_eq!(select_pairwise_rows(&model, &rows).unwrap(), select_pairwise_rows(&model, &shifted).unwrap());
        prop_assert_eq!(select_pointwise_rows(&model, &rows).unwrap(), select_pointwise_rows(&model, &shifted).unwrap());
    }

    #[test]
    fn report_gain_endpoints(base in 0.1f64..0.9, gap in 0.01f64..0.1) {
        let oracle = base + gap;
        prop_assert_eq!(relative_gain(base, base, oracle), Some(0.0));
        prop_assert!((relative_gain(oracle, base, oracle).unwrap() - 1.0).abs() < 1e-12);
        prop_assert_eq!(relative_improvement(base, base), Some(0.0));
    }
}

/// Label the decoder must put on the root: the best real label of the full span.
fn best_root(table: &SpanScores) -> usize {
    let n = table.len();
    let mut best = 0;
    for l in 1..table.labels().len() {
        if table.score(l, 0, n) > table.score(best, 0, n) {
            best = l;
        }
    }
    best
}

#[test]
fn corpus_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.jsonl");
    let records = generate_corpus(&SynthConfig { sentences: 15, ..SynthConfig::default() }, 3);
    write_corpus(&path, &records).unwrap();
    assert_eq!(read_corpus(&path).unwrap(), records);
}

#[test]
fn model_text_round_trip() {
    let mut model = RankerModel::zero(ClassifierKind::Hinge, Objective::LABELED_BRACKET, FeaturePreset::Full);
    model.weights = (0..12).map(|i| (i as f64).sin() / 3.0).collect();
    model.standardization = (0..12).map(|i| (0.1 * i as f64, 1.0 + i as f64 / 7.0)).collect();
    model.bias = -0.125;
    model.c = 0.0005;
    assert_eq!(RankerModel::from_text(&model.to_text()).unwrap(), model);
}
