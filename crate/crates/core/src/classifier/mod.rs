//! Binary formality classifier, silver labeling and accuracy reporting.
//!
//! ```
//! use fsmt_core::classifier::{silver_label, SilverPolicy};
//! use fsmt_core::text::FormalityLabel;
//!
//! let policy = SilverPolicy::default();
//! assert_eq!(silver_label(0.90, &policy), Some(FormalityLabel::Formal));
//! assert_eq!(silver_label(0.15, &policy), Some(FormalityLabel::Informal));
//! assert_eq!(silver_label(0.50, &policy), None);
//! ```

mod model;

use std::collections::HashMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

pub use model::{features, train_classifier, LinearNGramModel, TrainConfig, TrainReport};

use crate::text::{FormalityLabel, Segment};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ClassifierError {
    #[error("training data needs at least one formal and one informal example")]
    DegenerateData,
    #[error("label `{0}` cannot be used for training")]
    UntrainableLabel(FormalityLabel),
    #[error("evaluation set has no {0} examples")]
    EmptyClass(&'static str),
    #[error("thresholds must satisfy 0 <= informal < 0.5 < formal <= 1, got {informal} / {formal}")]
    InvalidPolicy { formal: f64, informal: f64 },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("score file line {line}: {message}")]
    InvalidScore { line: usize, message: String },
    #[error("I/O error: {0}")]
    Io(String),
}

impl ClassifierError {
    pub fn name(&self) -> &'static str {
        match self {
            ClassifierError::DegenerateData => "DegenerateData",
            ClassifierError::UntrainableLabel(_) => "UntrainableLabel",
            ClassifierError::EmptyClass(_) => "EmptyClass",
            ClassifierError::InvalidPolicy { .. } => "InvalidPolicy",
            ClassifierError::InvalidModel(_) => "InvalidModel",
            ClassifierError::InvalidScore { .. } => "InvalidScore",
            ClassifierError::Io(_) => "Io",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SilverPolicy {
    formal_threshold: f64,
    informal_threshold: f64,
}

impl SilverPolicy {
    pub fn new(formal_threshold: f64, informal_threshold: f64) -> Result<Self, ClassifierError> {
        let ok = formal_threshold > 0.5 && formal_threshold <= 1.0 && (0.0..0.5).contains(&informal_threshold);
        if !ok {
            return Err(ClassifierError::InvalidPolicy { formal: formal_threshold, informal: informal_threshold });
        }
        Ok(SilverPolicy { formal_threshold, informal_threshold })
    }

    pub fn formal_threshold(&self) -> f64 {
        self.formal_threshold
    }

    pub fn informal_threshold(&self) -> f64 {
        self.informal_threshold
    }
}

impl Default for SilverPolicy {
    fn default() -> Self {
        SilverPolicy { formal_threshold: 0.85, informal_threshold: 0.15 }
    }
}

/// `Formal` iff `p >= formal_threshold`, `Informal` iff
/// `p <= informal_threshold`, otherwise no label.
pub fn silver_label(p_formal: f64, policy: &SilverPolicy) -> Option<FormalityLabel> {
    if p_formal >= policy.formal_threshold {
        Some(FormalityLabel::Formal)
    } else if p_formal <= policy.informal_threshold {
        Some(FormalityLabel::Informal)
    } else {
        None
    }
}

/// Anything that can estimate P(formal | target).
pub trait FormalityScorer: Sync {
    /// `None` when no score is available for this record.
    fn p_formal(&self, id: Option<&str>, segment: &Segment) -> Option<f64>;
}

impl FormalityScorer for LinearNGramModel {
    fn p_formal(&self, _id: Option<&str>, segment: &Segment) -> Option<f64> {
        Some(self.predict_proba(segment))
    }
}

/// Precomputed probabilities keyed by record id, read from JSONL lines
/// `{"id": ..., "p_formal": ...}`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExternalScores {
    scores: HashMap<String, f64>,
}

#[derive(Deserialize)]
struct ScoreLine {
    id: serde_json::Value,
    p_formal: f64,
}

impl ExternalScores {
    pub fn from_reader(reader: impl BufRead) -> Result<Self, ClassifierError> {
        let mut scores = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| ClassifierError::Io(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |message: String| ClassifierError::InvalidScore { line: i + 1, message };
            let s: ScoreLine = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
            let id = match s.id {
                serde_json::Value::String(s) => s,
                serde_json::Value::Number(n) => n.to_string(),
                _ => return Err(bad("`id` must be a string or number".into())),
            };
            if !(0.0..=1.0).contains(&s.p_formal) {
                return Err(bad(format!("p_formal {} outside [0, 1]", s.p_formal)));
            }
            if scores.insert(id.clone(), s.p_formal).is_some() {
                return Err(bad(format!("duplicate id `{id}`")));
            }
        }
        Ok(ExternalScores { scores })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<f64> {
        self.scores.get(id).copied()
    }
}

impl FormalityScorer for ExternalScores {
    fn p_formal(&self, id: Option<&str>, _segment: &Segment) -> Option<f64> {
        self.get(id?)
    }
}

/// Per-class accuracy at the 0.5 decision threshold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierAccuracy {
    pub formal: f64,
    pub informal: f64,
    pub n_formal: usize,
    pub n_informal: usize,
}

/// Accuracy on the `Formal` and `Informal` examples of `dev`, reported
/// separately. Other labels are ignored.
pub fn eval_classifier(
    scorer: &dyn FormalityScorer,
    dev: &[(Segment, FormalityLabel)],
) -> Result<ClassifierAccuracy, ClassifierError> {
    let (mut nf, mut ni, mut cf, mut ci) = (0usize, 0usize, 0usize, 0usize);
    for (seg, label) in dev {
        let p = scorer.p_formal(None, seg).unwrap_or(0.5);
        match label {
            FormalityLabel::Formal => {
                nf += 1;
                cf += usize::from(p >= 0.5);
            }
            FormalityLabel::Informal => {
                ni += 1;
                ci += usize::from(p < 0.5);
            }
            _ => {}
        }
    }
    if nf == 0 {
        return Err(ClassifierError::EmptyClass("formal"));
    }
    if ni == 0 {
        return Err(ClassifierError::EmptyClass("informal"));
    }
    Ok(ClassifierAccuracy {
        formal: cf as f64 / nf as f64,
        informal: ci as f64 / ni as f64,
        n_formal: nf,
        n_informal: ni,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::Lang;
    use proptest::prelude::*;

    fn de(t: &str) -> Segment {
        Segment::new(t, Lang::new("de").unwrap())
    }

    fn separable() -> Vec<(Segment, FormalityLabel)> {
        let verbs = ["Haben", "Kommen", "Gehen", "Sehen", "Wissen", "Möchten", "Können", "Wollen"];
        let rest = ["heute", "morgen", "das Buch", "nach Hause", "etwas", "viel", "mit", "gern"];
        let mut out = Vec::new();
        for (v, r) in verbs.iter().zip(rest) {
            out.push((de(&format!("{v} Sie {r}?")), FormalityLabel::Formal));
            out.push((de(&format!("{v} du {r}?")), FormalityLabel::Informal));
        }
        out
    }

    #[test]
    fn separable_fixture() {
        let data = separable();
        let (m, report) = train_classifier(&data, &TrainConfig::default()).unwrap();
        let acc = eval_classifier(&m, &data).unwrap();
        assert_eq!((acc.formal, acc.informal), (1.0, 1.0));
        assert!(m.predict_proba(&de("Haben Sie heute?")) > 0.85);
        assert!(m.predict_proba(&de("Haben du heute?")) < 0.15);
        for w in report.losses.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "loss went up: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn degenerate_and_neutral_sizes() {
        let only_formal = vec![(de("Sie"), FormalityLabel::Formal)];
        assert_eq!(
            train_classifier(&only_formal, &TrainConfig::default()).unwrap_err(),
            ClassifierError::DegenerateData
        );
        let mut data = Vec::new();
        for i in 0..10 {
            data.push((de(&format!("Sie {i}")), FormalityLabel::Formal));
            data.push((de(&format!("du {i}")), FormalityLabel::Informal));
        }
        for i in 0..5 {
            data.push((de(&format!("Legos {i}")), FormalityLabel::Neutral));
        }
        let cfg = TrainConfig { epochs: 1, ..Default::default() };
        assert_eq!(train_classifier(&data, &cfg).unwrap().1.effective_size, 30);
        data.push((de("x"), FormalityLabel::Unknown));
        assert!(matches!(train_classifier(&data, &cfg), Err(ClassifierError::UntrainableLabel(_))));
    }

    #[test]
    fn deterministic_training() {
        let cfg = TrainConfig { epochs: 50, seed: 3, ..Default::default() };
        let (a, _) = train_classifier(&separable(), &cfg).unwrap();
        let (b, _) = train_classifier(&separable(), &cfg).unwrap();
        assert_eq!(a, b);
        let s = de("Wissen Sie etwas?");
        assert_eq!(a.predict_proba(&s).to_bits(), a.predict_proba(&s).to_bits());
    }

    #[test]
    fn label_flip_symmetry() {
        let cfg = TrainConfig { epochs: 100, ..Default::default() };
        let data = separable();
        let flipped: Vec<_> = data
            .iter()
            .map(|(s, l)| {
                let l = if *l == FormalityLabel::Formal { FormalityLabel::Informal } else { FormalityLabel::Formal };
                (s.clone(), l)
            })
            .collect();
        let (a, _) = train_classifier(&data, &cfg).unwrap();
        let (b, _) = train_classifier(&flipped, &cfg).unwrap();
        for t in ["Haben Sie heute?", "Gehen du viel?", "Ganz neu", "Sie du"] {
            let (da, db) = (a.decision(t), b.decision(t));
            assert!((da + db).abs() < 1e-9, "{t}: {da} vs {db}");
        }
    }

    struct Constant(f64);
    impl FormalityScorer for Constant {
        fn p_formal(&self, _: Option<&str>, _: &Segment) -> Option<f64> {
            Some(self.0)
        }
    }

    #[test]
    fn eval_shapes() {
        let data = separable();
        let acc = eval_classifier(&Constant(1.0), &data).unwrap();
        assert_eq!((acc.formal, acc.informal), (1.0, 0.0));

        struct OneWrong;
        impl FormalityScorer for OneWrong {
            fn p_formal(&self, _: Option<&str>, s: &Segment) -> Option<f64> {
                Some(if s.text() == "F0" || s.text().starts_with('I') { 0.0 } else { 1.0 })
            }
        }
        let mut dev: Vec<_> = (0..20).map(|i| (de(&format!("F{i}")), FormalityLabel::Formal)).collect();
        dev.extend((0..20).map(|i| (de(&format!("I{i}")), FormalityLabel::Informal)));
        let acc = eval_classifier(&OneWrong, &dev).unwrap();
        assert_eq!((acc.formal, acc.informal), (0.95, 1.0));

        let only_formal = &dev[..20];
        assert_eq!(eval_classifier(&OneWrong, only_formal), Err(ClassifierError::EmptyClass("informal")));
    }

    #[test]
    fn external_scores() {
        let src = "{\"id\": \"a\", \"p_formal\": 0.9}\n\n{\"id\": 7, \"p_formal\": 0.1}\n";
        let s = ExternalScores::from_reader(src.as_bytes()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.p_formal(Some("7"), &de("")), Some(0.1));
        assert_eq!(s.p_formal(None, &de("")), None);
        let bad = ExternalScores::from_reader("{\"id\": \"a\", \"p_formal\": 1.5}".as_bytes());
        assert!(matches!(bad, Err(ClassifierError::InvalidScore { line: 1, .. })));
        let dup = ExternalScores::from_reader("{\"id\":1,\"p_formal\":0.2}\n{\"id\":1,\"p_formal\":0.3}".as_bytes());
        assert!(matches!(dup, Err(ClassifierError::InvalidScore { line: 2, .. })));
    }

    #[test]
    fn policy_validation() {
        assert!(SilverPolicy::new(0.85, 0.15).is_ok());
        assert!(SilverPolicy::new(0.5, 0.15).is_err());
        assert!(SilverPolicy::new(0.9, 0.5).is_err());
        assert!(SilverPolicy::new(1.1, 0.1).is_err());
    }

    proptest! {
        #[test]
        fn silver_monotone(p1 in 0.0f64..=1.0, p2 in 0.0f64..=1.0, f in 0.5001f64..=1.0, i in 0.0f64..0.5) {
            let pol = SilverPolicy::new(f, i).unwrap();
            let (hi, lo) = if p1 >= p2 { (p1, p2) } else { (p2, p1) };
            if silver_label(lo, &pol) == Some(FormalityLabel::Formal) {
                prop_assert_eq!(silver_label(hi, &pol), Some(FormalityLabel::Formal));
            }
            if silver_label(hi, &pol) == Some(FormalityLabel::Informal) {
                prop_assert_eq!(silver_label(lo, &pol), Some(FormalityLabel::Informal));
            }
            let mid = (f + i) / 2.0;
            prop_assert_eq!(silver_label(mid, &pol), None);
        }
    }
}
