use std::path::Path;
use std::process::{Command, Output};

use asr_rerank::pipeline::write_corpus;
use asr_rerank::synth::{generate_corpus, SynthConfig};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_asr-rerank")).args(args).output().unwrap()
}

fn p(path: &Path) -> String {
    path.display().to_string()
}

fn corpus(dir: &Path, name: &str, seed: u64, sentences: usize) -> String {
    let path = dir.join(name);
    write_corpus(&path, &generate_corpus(&SynthConfig { sentences, ..SynthConfig::default() }, seed)).unwrap();
    p(&path)
}

#[test]
fn decode_spans_writes_best_tree() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("spans.txt");
    std::fs::write(&input, "#asr-rerank-spans v1\nn 2\nwords w0 w1\nlabels S\npreterminals X X\nscores 0.5 1.0 -0.2\n").unwrap();
    let out = cli(&["decode-spans", "--input", &p(&input)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "(S (S (X w0)) (X w1))\n");
}

#[test]
fn score_report_rerank_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let train = corpus(d, "train.jsonl", 1, 40);
    let dev = corpus(d, "dev.jsonl", 2, 30);
    let test = corpus(d, "test.jsonl", 3, 30);
    let models = p(&d.join("models"));
    let out = cli(&["train-ranker", "--corpus", &train, "--dev", &dev, "--output", &models, "--c-grid", "1", "--presets", "core", "--seeds", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for o in ["unlabeled-dep", "unlabeled-brk", "labeled-dep", "labeled-brk"] {
        assert!(d.join("models").join(format!("{o}.model")).exists());
    }

    let scores = p(&d.join("scores.json"));
    assert!(cli(&["score", "--corpus", &test, "--models", &models, "--output", &scores]).status.success());
    let out = cli(&["report", "--scores", &scores]);
    let text = String::from_utf8(out.stdout).unwrap();
    for row in ["1-best", "parse-score", "ranker-point", "ranker-pair", "oracle", "%Δ,ranker-point", "%↕,ranker-pair"] {
        assert!(text.contains(row), "{row} missing from\n{text}");
    }
    let out = cli(&["report", "--scores", &scores, "--format", "json"]);
    assert!(serde_json::from_slice::<serde_json::Value>(&out.stdout).is_ok());

    let a = p(&d.join("point.tsv"));
    let b = p(&d.join("pair.tsv"));
    assert!(cli(&["rerank", "--corpus", &test, "--models", &models, "--output", &a]).status.success());
    assert!(cli(&["rerank", "--corpus", &test, "--models", &models, "--method", "pair", "--objective", "unlabeled-dep", "--output", &b]).status.success());
    assert_eq!(std::fs::read_to_string(&a).unwrap().lines().count(), 31);
    let out = cli(&["analyze", "--corpus", &test, "--a", &a, "--b", &b, "--format", "json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["subsets"].as_array().unwrap().len(), 2);
}

#[test]
fn error_categories_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let missing = p(&d.join("missing.jsonl"));
    let out = cli(&["score", "--corpus", &missing, "--output", &p(&d.join("s.json"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("[io]"));

    let good = corpus(d, "good.jsonl", 5, 3);
    let mut text = std::fs::read_to_string(&good).unwrap();
    text.push_str("{\"id\": \"broken\"}\n");
    let bad = d.join("bad.jsonl");
    std::fs::write(&bad, text).unwrap();
    let out = cli(&["score", "--strict", "--corpus", &p(&bad), "--output", &p(&d.join("s.json"))]);
    assert_eq!(out.status.code(), Some(4));
    let out = cli(&["score", "--corpus", &p(&bad), "--output", &p(&d.join("s.json"))]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("skipped"));

    let out = cli(&["train-ranker", "--corpus", &good, "--dev", &good, "--output", &p(&d.join("m")), "--c-grid", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(cli(&["score", "--bogus"]).status.code(), Some(2));

    let single = d.join("single.jsonl");
    std::fs::write(
        &single,
        "#asr-rerank-corpus v1\n{\"id\":\"u1\",\"gold\":\"(S (NP (PRP i)))\",\"hypotheses\":[{\"words\":[\"i\"],\"asr_score\":-1.0,\"parse\":\"(S (NP (PRP i)))\",\"parse_score\":-1.0}]}\n",
    )
    .unwrap();
    let out = cli(&["train-ranker", "--corpus", &p(&single), "--dev", &p(&single), "--output", &p(&d.join("m")), "--c-grid", "1", "--presets", "core", "--seeds", "1"]);
    assert_eq!(out.status.code(), Some(6), "{}", String::from_utf8_lossy(&out.stderr));
}
