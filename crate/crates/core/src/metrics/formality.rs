//! Phrase-contrastive formality accuracy.
//!
//! Each hypothesis is checked for the contrastive phrases of its formal and
//! informal reference:
//!
//! | formal phrase found | informal phrase found | verdict    |
//! |---------------------|-----------------------|------------|
//! | yes                 | no                    | `FORMAL`   |
//! | no                  | yes                   | `INFORMAL` |
//! | yes                 | yes                   | `OTHER`    |
//! | no                  | no                    | `NEUTRAL`  |
//!
//! Accuracy toward a level is the share of that level's verdicts among the
//! `FORMAL` and `INFORMAL` verdicts only.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{phi, AnnotatedReference, MetricsError};
use crate::text::{Tokenizer, Tokenizer13a};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum HypothesisVerdict {
    Formal,
    Informal,
    Neutral,
    Other,
}

impl fmt::Display for HypothesisVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HypothesisVerdict::Formal => "FORMAL",
            HypothesisVerdict::Informal => "INFORMAL",
            HypothesisVerdict::Neutral => "NEUTRAL",
            HypothesisVerdict::Other => "OTHER",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetLevel {
    Formal,
    Informal,
}

impl std::str::FromStr for TargetLevel {
    type Err = MetricsError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "formal" | "f" => Ok(TargetLevel::Formal),
            "informal" | "if" | "i" => Ok(TargetLevel::Informal),
            _ => Err(MetricsError::UnknownTarget(s.to_owned())),
        }
    }
}

/// How phrase occurrence is decided.
#[derive(Clone, Copy)]
pub struct MatchOptions<'a> {
    pub tokenizer: &'a dyn Tokenizer,
    pub case_sensitive: bool,
}

impl Default for MatchOptions<'_> {
    fn default() -> Self {
        MatchOptions { tokenizer: &Tokenizer13a, case_sensitive: true }
    }
}

impl MatchOptions<'_> {
    fn tokens(&self, text: &str) -> Vec<String> {
        if self.case_sensitive {
            self.tokenizer.tokenize(text)
        } else {
            self.tokenizer.tokenize(&text.to_lowercase())
        }
    }
}

fn contains_run(haystack: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

fn any_phrase_occurs(hyp: &[String], phrases: &[String], opts: &MatchOptions<'_>) -> bool {
    phrases.iter().any(|p| contains_run(hyp, &opts.tokens(p)))
}

/// Classifies `hyp` with 13a tokens and case-sensitive, token-aligned matching.
///
/// ```
/// use fsmt_core::metrics::{classify_hypothesis, HypothesisVerdict};
///
/// let f = vec!["Mögen Sie".to_string()];
/// let inf = vec!["Magst du".to_string()];
/// assert_eq!(classify_hypothesis("Mögen Sie Legos?", &f, &inf), HypothesisVerdict::Formal);
/// // "du" does not match inside "dunkel"
/// assert_eq!(classify_hypothesis("Magst dunkel?", &f, &inf), HypothesisVerdict::Neutral);
/// ```
pub fn classify_hypothesis(hyp: &str, formal_phrases: &[String], informal_phrases: &[String]) -> HypothesisVerdict {
    classify_hypothesis_with(hyp, formal_phrases, informal_phrases, &MatchOptions::default())
}

pub fn classify_hypothesis_with(
    hyp: &str,
    formal_phrases: &[String],
    informal_phrases: &[String],
    opts: &MatchOptions<'_>,
) -> HypothesisVerdict {
    let toks = opts.tokens(hyp);
    let f = any_phrase_occurs(&toks, formal_phrases, opts);
    let i = any_phrase_occurs(&toks, informal_phrases, opts);
    match (f, i) {
        (true, false) => HypothesisVerdict::Formal,
        (false, true) => HypothesisVerdict::Informal,
        (true, true) => HypothesisVerdict::Other,
        (false, false) => HypothesisVerdict::Neutral,
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    #[serde(rename = "FORMAL")]
    pub formal: usize,
    #[serde(rename = "INFORMAL")]
    pub informal: usize,
    #[serde(rename = "NEUTRAL")]
    pub neutral: usize,
    #[serde(rename = "OTHER")]
    pub other: usize,
}

impl ClassCounts {
    pub fn add(&mut self, v: HypothesisVerdict) {
        match v {
            HypothesisVerdict::Formal => self.formal += 1,
            HypothesisVerdict::Informal => self.informal += 1,
            HypothesisVerdict::Neutral => self.neutral += 1,
            HypothesisVerdict::Other => self.other += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.formal + self.informal + self.neutral + self.other
    }
}

impl fmt::Display for ClassCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FORMAL={} INFORMAL={} NEUTRAL={} OTHER={}", self.formal, self.informal, self.neutral, self.other)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub target: TargetLevel,
    pub counts: ClassCounts,
    pub acc_formal: f64,
    pub acc_informal: f64,
    pub size: usize,
}

impl AccuracyReport {
    pub fn match_f(&self) -> usize {
        self.counts.formal
    }

    pub fn match_i(&self) -> usize {
        self.counts.informal
    }

    /// Accuracy toward the requested target level.
    pub fn accuracy(&self) -> f64 {
        match self.target {
            TargetLevel::Formal => self.acc_formal,
            TargetLevel::Informal => self.acc_informal,
        }
    }
}

/// Verdict for every hypothesis, in input order.
pub fn verdicts(
    hyps: &[impl AsRef<str> + Sync],
    formal_refs: &[AnnotatedReference],
    informal_refs: &[AnnotatedReference],
    opts: &MatchOptions<'_>,
) -> Result<Vec<HypothesisVerdict>, MetricsError> {
    if hyps.len() != formal_refs.len() || hyps.len() != informal_refs.len() {
        let references = if formal_refs.len() != hyps.len() { formal_refs.len() } else { informal_refs.len() };
        return Err(MetricsError::LengthMismatch { hypotheses: hyps.len(), references });
    }
    if hyps.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let out = hyps
        .par_iter()
        .zip(formal_refs.par_iter().zip(informal_refs.par_iter()))
        .map(|(h, (f, i))| classify_hypothesis_with(h.as_ref(), &phi(f), &phi(i), opts))
        .collect();
    Ok(out)
}

pub fn formality_accuracy(
    hyps: &[impl AsRef<str> + Sync],
    formal_refs: &[AnnotatedReference],
    informal_refs: &[AnnotatedReference],
    target: TargetLevel,
) -> Result<AccuracyReport, MetricsError> {
    formality_accuracy_with(hyps, formal_refs, informal_refs, target, &MatchOptions::default())
}

/// Fails with [`MetricsError::DegenerateDenominator`] when no hypothesis is
/// `FORMAL` or `INFORMAL`; the error carries the class counts.
pub fn formality_accuracy_with(
    hyps: &[impl AsRef<str> + Sync],
    formal_refs: &[AnnotatedReference],
    informal_refs: &[AnnotatedReference],
    target: TargetLevel,
    opts: &MatchOptions<'_>,
) -> Result<AccuracyReport, MetricsError> {
    let vs = verdicts(hyps, formal_refs, informal_refs, opts)?;
    let mut counts = ClassCounts::default();
    for v in vs {
        counts.add(v);
    }
    let denom = counts.formal + counts.informal;
    if denom == 0 {
        return Err(MetricsError::DegenerateDenominator(counts));
    }
    Ok(AccuracyReport {
        target,
        counts,
        acc_formal: counts.formal as f64 / denom as f64,
        acc_informal: counts.informal as f64 / denom as f64,
        size: hyps.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn verdict_examples() {
        let f = s(&["Mögen Sie"]);
        let i = s(&["Magst du"]);
        assert_eq!(classify_hypothesis("Mögen Sie Legos?", &f, &i), HypothesisVerdict::Formal);
        assert_eq!(classify_hypothesis("Spielst du gern?", &f, &i), HypothesisVerdict::Neutral);
        assert_eq!(classify_hypothesis("Magst du, äh, Mögen Sie Legos?", &f, &i), HypothesisVerdict::Other);
    }

    #[test]
    fn matching_is_case_sensitive_by_default() {
        let f = s(&["Mögen Sie"]);
        let i = s(&["Magst du"]);
        let h = "Magst du, äh, mögen Sie Legos?";
        assert_eq!(classify_hypothesis(h, &f, &i), HypothesisVerdict::Informal);
        let folded = MatchOptions { case_sensitive: false, ..Default::default() };
        assert_eq!(classify_hypothesis_with(h, &f, &i, &folded), HypothesisVerdict::Other);
    }

    #[test]
    fn phrases_respect_token_boundaries() {
        let f = s(&["Sie"]);
        let i = s(&["du"]);
        assert_eq!(classify_hypothesis("Ein dunkler Raum.", &f, &i), HypothesisVerdict::Neutral);
        assert_eq!(classify_hypothesis("Siehst du?", &f, &i), HypothesisVerdict::Informal);
        assert_eq!(classify_hypothesis("Sie, bitte.", &f, &i), HypothesisVerdict::Formal);
    }

    fn refs(n: usize, markup: &str) -> Vec<AnnotatedReference> {
        vec![AnnotatedReference::parse(markup).unwrap(); n]
    }

    #[test]
    fn accuracy_excludes_neutral_and_other() {
        let hyps = ["Mögen Sie Legos?", "Mögen Sie Autos?", "Mögen Sie Züge?", "Magst du Legos?", "Legos?", "Autos!"];
        let f = refs(6, "[F]Mögen Sie[/F] Legos?");
        let i = refs(6, "[F]Magst du[/F] Legos?");
        let r = formality_accuracy(&hyps, &f, &i, TargetLevel::Formal).unwrap();
        assert_eq!(r.counts, ClassCounts { formal: 3, informal: 1, neutral: 2, other: 0 });
        assert_eq!(r.accuracy(), 0.75);
        assert_eq!(r.acc_informal, 0.25);
        assert_eq!(r.counts.total(), r.size);
    }

    #[test]
    fn perfect_formal() {
        let hyps = ["Mögen Sie Legos?"; 4];
        let r = formality_accuracy(
            &hyps,
            &refs(4, "[F]Mögen Sie[/F] Legos?"),
            &refs(4, "[F]Magst du[/F] Legos?"),
            TargetLevel::Formal,
        )
        .unwrap();
        assert_eq!(r.acc_formal, 1.0);
    }

    #[test]
    fn error_cases() {
        let empty: [&str; 0] = [];
        assert_eq!(formality_accuracy(&empty, &[], &[], TargetLevel::Formal), Err(MetricsError::EmptyCorpus));
        let r = formality_accuracy(&["a", "b"], &refs(1, "[F]x[/F]"), &refs(1, "[F]y[/F]"), TargetLevel::Formal);
        assert!(matches!(r, Err(MetricsError::LengthMismatch { .. })));
        let r = formality_accuracy(&["a"], &refs(1, "[F]x[/F]"), &refs(1, "[F]y[/F]"), TargetLevel::Formal);
        assert_eq!(r, Err(MetricsError::DegenerateDenominator(ClassCounts { neutral: 1, ..Default::default() })));
    }
}
