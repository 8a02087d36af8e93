use std::path::Path;
use std::process::{Command, Output};

use fsmt_cli::RunManifest;
use fsmt_core::intervention::{gen_toylang_with, ToyConfig};
use fsmt_core::text::{write_jsonl, PairedRecord};
use serde_json::Value;

fn fsmt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fsmt")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = fsmt(args);
    assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn error_json(out: &Output) -> Value {
    serde_json::from_str(String::from_utf8_lossy(&out.stderr).trim()).expect("stderr is JSON")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn unknown_subcommand_is_usage_error() {
    assert_eq!(fsmt(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(fsmt(&["score", "--hyp", "x"]).status.code(), Some(2));
}

#[test]
fn score_length_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let hyp = dir.path().join("h.txt");
    let f = dir.path().join("f.ann");
    let i = dir.path().join("i.ann");
    std::fs::write(&hyp, "Können [F]Sie[/F] helfen?\nnoch eine\n").unwrap();
    std::fs::write(&f, "Können [F]Sie[/F] helfen?\n").unwrap();
    std::fs::write(&i, "Kannst [F]du[/F] helfen?\n").unwrap();
    let out = fsmt(&["score", "--hyp", s(&hyp), "--formal-ref", s(&f), "--informal-ref", s(&i), "--target", "formal"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_json(&out)["error"], "LengthMismatch");
}

#[test]
fn bad_markup_is_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let hyp = dir.path().join("h.txt");
    let f = dir.path().join("f.ann");
    std::fs::write(&hyp, "a\n").unwrap();
    std::fs::write(&f, "[F]unclosed\n").unwrap();
    let out = fsmt(&["score", "--hyp", s(&hyp), "--formal-ref", s(&f), "--informal-ref", s(&f), "--target", "formal"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_json(&out)["error"], "ParseError");
}

#[test]
fn ter_and_bleu() {
    let dir = tempfile::tempdir().unwrap();
    let hyp = dir.path().join("h.txt");
    let r = dir.path().join("r.txt");
    std::fs::write(&hyp, "the cat sat on the mat\n").unwrap();
    std::fs::write(&r, "the cat sat on the mat\n").unwrap();
    let ter: Value = serde_json::from_str(&ok(&["ter", "--hyp", s(&hyp), "--ref", s(&r)])).unwrap();
    assert_eq!(ter["mean_ter"], 0.0);
    let bleu: Value = serde_json::from_str(&ok(&["bleu", "--hyp", s(&hyp), "--ref", s(&r)])).unwrap();
    assert!((bleu["score"].as_f64().unwrap() - 100.0).abs() < 1e-9);
    assert_eq!(fsmt(&["bleu", "--hyp", s(&hyp), "--ref", s(&r), "--tokenize", "nope"]).status.code(), Some(2));
}

#[test]
fn toy_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    let cfg = p("c.toml");
    std::fs::write(&cfg, "[toy-train]\nd_model = 32\nheads = 2\nd_ff = 64\n").unwrap();
    ok(&["toy-gen", "--n", "400", "--seed", "1", "--out", s(&p("train.jsonl"))]);
    ok(&["toy-gen", "--n", "40", "--seed", "2", "--out", s(&p("test.jsonl"))]);
    let metrics = ok(&[
        "toy-train",
        "--config",
        s(&cfg),
        "--in",
        s(&p("train.jsonl")),
        "--out",
        s(&p("model.bin")),
        "--epochs",
        "10",
    ]);
    let losses: Vec<f64> =
        metrics.lines().map(|l| serde_json::from_str::<Value>(l).unwrap()["loss"].as_f64().unwrap()).collect();
    assert_eq!(losses.len(), 10);
    assert!(losses[9] < losses[0]);
    let eval = p("eval");
    ok(&["toy-eval", "--model", s(&p("model.bin")), "--in", s(&p("test.jsonl")), "--out-dir", s(&eval)]);
    for f in ["eval.json", "formal.hyp.txt", "informal.hyp.txt", "formal.ann", "informal.ann"] {
        assert!(eval.join(f).exists(), "{f}");
    }
    let out = p("score.json");
    ok(&[
        "score",
        "--hyp",
        s(&eval.join("formal.hyp.txt")),
        "--formal-ref",
        s(&eval.join("formal.ann")),
        "--informal-ref",
        s(&eval.join("informal.ann")),
        "--target",
        "formal",
        "--out",
        s(&out),
    ]);
    let score: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(score["size"], 40);
    assert!(score["acc_formal"].as_f64().unwrap() > 0.5, "{score}");
    let m = RunManifest::read(&p("model.bin.manifest.json")).unwrap();
    assert_eq!(m.subcommand, "toy-train");
    assert_eq!(m.config["model"]["d_model"], 32);
    let md =
        ok(&["report", "--run", s(&p("model.bin.manifest.json")), "--score", s(&out), "--corpus", s(&p("test.jsonl"))]);
    assert!(md.contains("| # Pairs | 40 |"), "{md}");
    assert!(md.contains("| Metric | score.json |"), "{md}");
}

#[test]
fn report_counts_neutral_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("toy.jsonl");
    let mut pairs = gen_toylang_with(90, 1, &ToyConfig { neutral_fraction: 0.0, ..ToyConfig::default() });
    pairs.extend(gen_toylang_with(10, 2, &ToyConfig { neutral_fraction: 1.0, ..ToyConfig::default() }));
    write_jsonl(std::fs::File::create(&corpus).unwrap(), pairs.iter().map(PairedRecord::from_example)).unwrap();
    let md = ok(&["report", "--corpus", s(&corpus)]);
    assert!(md.contains("| # Neutral | 10 |"), "{md}");
    assert_eq!(ok(&["report"]), "# fsmt report\n");
}

#[test]
fn manifests_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        ok(&["toy-gen", "--n", "50", "--seed", "9", "--out", s(&out)]);
        RunManifest::read(&dir.path().join(format!("{name}.manifest.json"))).unwrap()
    };
    let (a, b) = (run("a.jsonl"), run("b.jsonl"));
    assert_eq!(a.outputs[0].sha256, b.outputs[0].sha256);
    assert_eq!(a.outputs[0].bytes, b.outputs[0].bytes);
    assert_eq!((a.seed, &a.config), (b.seed, &b.config));
    let explicit = dir.path().join("m.json");
    ok(&["toy-gen", "--n", "50", "--seed", "10", "--out", s(&dir.path().join("c.jsonl")), "--manifest", s(&explicit)]);
    let c = RunManifest::read(&explicit).unwrap();
    assert_ne!(c.outputs[0].sha256, a.outputs[0].sha256);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    let lines = |path: &Path| std::fs::read_to_string(path).unwrap().lines().count();
    std::fs::write(p("c.toml"), "seed = 5\n[toy-gen]\nn = 7\n").unwrap();
    ok(&["toy-gen", "--config", s(&p("c.toml")), "--out", s(&p("a.jsonl"))]);
    assert_eq!(lines(&p("a.jsonl")), 7);
    ok(&["toy-gen", "--n", "7", "--seed", "5", "--out", s(&p("b.jsonl"))]);
    assert_eq!(std::fs::read(p("a.jsonl")).unwrap(), std::fs::read(p("b.jsonl")).unwrap());
    ok(&["toy-gen", "--config", s(&p("c.toml")), "--n", "3", "--out", s(&p("d.jsonl"))]);
    assert_eq!(lines(&p("d.jsonl")), 3);

    std::fs::write(p("bad.toml"), "[toy-gen]\nsize = 7\n").unwrap();
    let out = fsmt(&["toy-gen", "--config", s(&p("bad.toml")), "--out", s(&p("e.jsonl"))]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_json(&out)["error"], "ParseError");
}

fn german_tsv(path: &Path) {
    let verbs = ["helfen", "antworten", "kommen", "warten", "schreiben", "bleiben", "gehen", "fragen"];
    let mut text = String::new();
    for v in verbs {
        text.push_str(&format!("Can you {v}?\tKönnen Sie mir bitte {v}?\n"));
        text.push_str(&format!("Can you {v}?\tKannst du mir bitte {v}?\n"));
        text.push_str(&format!("Will you {v}?\tWillst du {v}?\n"));
        text.push_str(&format!("We {v}.\tWir {v}.\n"));
    }
    text.push_str("broken line without a tab\n");
    std::fs::write(path, text).unwrap();
}

#[test]
fn label_curate_classify() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    german_tsv(&p("de.tsv"));

    let summary: Value =
        serde_json::from_str(&ok(&["label", "--lang", "de", "--in", s(&p("de.tsv")), "--out", s(&p("labeled.jsonl"))]))
            .unwrap();
    assert_eq!(summary["malformed"], 1);
    assert_eq!(summary["counts"]["formal"], 8);
    assert_eq!(summary["counts"]["informal"], 16);
    let labeled = std::fs::read_to_string(p("labeled.jsonl")).unwrap();
    assert_eq!(labeled.lines().count(), 32);

    // The malformed TSV line is counted, not fatal.
    ok(&[
        "curate",
        "--in",
        s(&p("de.tsv")),
        "--lang",
        "de",
        "--out",
        s(&p("triplets.jsonl")),
        "--report",
        s(&p("report.json")),
    ]);
    let triplets = std::fs::read_to_string(p("triplets.jsonl")).unwrap();
    assert!(triplets.lines().count() > 0);
    let report: Value = serde_json::from_str(&std::fs::read_to_string(p("report.json")).unwrap()).unwrap();
    assert!(report.is_object());

    let out =
        fsmt(&["curate", "--in", s(&p("de.tsv")), "--lang", "de", "--labeler", "classifier", "--out", s(&p("x"))]);
    assert_eq!(out.status.code(), Some(2));

    ok(&["train-classifier", "--in", s(&p("labeled.jsonl")), "--out", s(&p("clf.json")), "--epochs", "50"]);
    ok(&["predict", "--model", s(&p("clf.json")), "--in", s(&p("labeled.jsonl")), "--out", s(&p("pred.jsonl"))]);
    let preds: Vec<Value> =
        std::fs::read_to_string(p("pred.jsonl")).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(preds.len(), 32);
    let p_formal = |i: usize| preds[i]["p_formal"].as_f64().unwrap();
    assert!(p_formal(0) > p_formal(1), "{:?}", &preds[..2]);

    ok(&[
        "curate",
        "--in",
        s(&p("labeled.jsonl")),
        "--labeler",
        "classifier",
        "--model",
        s(&p("clf.json")),
        "--out",
        s(&p("silver.jsonl")),
        "--report",
        s(&p("silver.report.json")),
    ]);
}

#[test]
fn label_needs_a_language() {
    let dir = tempfile::tempdir().unwrap();
    let tsv = dir.path().join("x.tsv");
    std::fs::write(&tsv, "a\tb\n").unwrap();
    let out = fsmt(&["label", "--in", s(&tsv), "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    let out = fsmt(&["label", "--lang", "xx", "--in", s(&tsv), "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_json(&out)["error"], "UnsupportedLanguage");
}
