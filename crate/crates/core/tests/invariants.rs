use proptest::prelude::*;

use fsmt_core::curation::{curate, CapMode, CurationConfig, Labeler};
use fsmt_core::intervention::{gen_toylang, load_checkpoint, save_checkpoint, ModelConfig, TrainConfig};
use fsmt_core::metrics::{classify_hypothesis, corpus_bleu, edit_distance, ter, HypothesisVerdict};
use fsmt_core::rules::builtin;
use fsmt_core::text::{write_jsonl, BitextRecord, JsonlReader, Lang, LanguageSet, PairedRecord, Tokenizer13a};

fn words() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "du", "Sie", "x"]), 0..8)
        .prop_map(|v| v.into_iter().map(str::to_owned).collect())
}

proptest! {
    #[test]
    fn ter_normalization_is_the_only_asymmetry(a in words(), b in words()) {
        prop_assume!(!a.is_empty() && !b.is_empty());
        let lhs = ter(&a, &b).unwrap() * b.len() as f64;
        let rhs = ter(&b, &a).unwrap() * a.len() as f64;
        prop_assert!((lhs - rhs).abs() < 1e-9);
        prop_assert_eq!(edit_distance(&a, &b), edit_distance(&b, &a));
    }

    #[test]
    fn bleu_is_bounded(h in words(), r in words()) {
        prop_assume!(!r.is_empty());
        let (h, r) = (h.join(" "), r.join(" "));
        let score = corpus_bleu(&[&h], &[&r], &Tokenizer13a).unwrap().score;
        prop_assert!((0.0..=100.0 + 1e-9).contains(&score));
        let same = corpus_bleu(&[&r], &[&r], &Tokenizer13a).unwrap().score;
        prop_assert!((same - 100.0).abs() < 1e-9);
    }

    #[test]
    fn verdict_follows_phrase_presence(h in words()) {
        let h = h.join(" ");
        let f = vec!["Sie".to_owned()];
        let i = vec!["du".to_owned()];
        let toks: Vec<&str> = h.split(' ').collect();
        let expected = match (toks.contains(&"Sie"), toks.contains(&"du")) {
            (true, false) => HypothesisVerdict::Formal,
            (false, true) => HypothesisVerdict::Informal,
            (true, true) => HypothesisVerdict::Other,
            (false, false) => HypothesisVerdict::Neutral,
        };
        prop_assert_eq!(classify_hypothesis(&h, &f, &i), expected);
    }

    #[test]
    fn curation_conserves_records(
        picks in prop::collection::vec(0usize..6, 0..60),
        cap in 1usize..5,
        reservoir in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let de = Lang::new("de").unwrap();
        let targets = ["Kommen Sie?", "Kommst du?", "Es regnet.", "Sie und du?", "Hast du Zeit?", "Haben Sie Zeit?"];
        let records: Vec<BitextRecord> = picks
            .iter()
            .enumerate()
            .map(|(n, &k)| BitextRecord::new(&format!("src {}", n % 7), targets[k], de.clone()))
            .collect();
        let config = CurationConfig {
            cap_per_level: cap,
            cap_mode: if reservoir { CapMode::Reservoir } else { CapMode::First },
            seed,
            ..CurationConfig::default()
        };
        let labeler = Labeler::Rules(vec![builtin(&de).unwrap()]);
        let run = || curate(records.clone().into_iter().map(Ok), &labeler, &config).unwrap();
        let (triplets, report) = run();
        prop_assert_eq!(report.seen(), records.len());
        prop_assert_eq!(report.accepted() + report.dropped(), records.len());
        prop_assert_eq!(report.accepted(), triplets.len());
        for label in [fsmt_core::text::FormalityLabel::Formal, fsmt_core::text::FormalityLabel::Informal] {
            prop_assert!(triplets.iter().filter(|t| t.label == label).count() <= cap);
        }
        prop_assert_eq!(run().0, triplets);
    }
}

#[test]
fn paired_records_round_trip() {
    let pairs = gen_toylang(50, 3);
    let mut buf = Vec::new();
    write_jsonl(&mut buf, pairs.iter().map(PairedRecord::from_example)).unwrap();
    let back: Vec<_> = JsonlReader::<_, PairedRecord>::new(&buf[..], LanguageSet::Any)
        .map(|r| r.unwrap().to_example().unwrap())
        .collect();
    assert_eq!(back, pairs);
}

#[test]
fn checkpoint_round_trip_preserves_decoding() {
    let pairs = gen_toylang(30, 4);
    let triplets: Vec<_> = pairs.iter().flat_map(|p| p.triplets()).collect();
    let config = TrainConfig {
        model: ModelConfig { d_model: 16, layers: 1, heads: 2, d_ff: 32 },
        seed: 5,
        ..TrainConfig::default()
    };
    let model = config.build_model(&[&triplets]).unwrap();
    let mut buf = Vec::new();
    save_checkpoint(&model, &mut buf).unwrap();
    let loaded = load_checkpoint(&buf[..]).unwrap();
    let p = &pairs[0];
    for f in [fsmt_core::text::FormalityLabel::Formal, fsmt_core::text::FormalityLabel::Informal] {
        assert_eq!(
            model.translate(p.source.text(), &p.target_lang, f, 12).unwrap(),
            loaded.translate(p.source.text(), &p.target_lang, f, 12).unwrap()
        );
    }
}
