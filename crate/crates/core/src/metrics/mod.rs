//! Scoring: formality accuracy, TER-noshift and BLEU.

mod annotated;
mod bleu;
mod formality;
mod ter;

pub use annotated::{phi, AnnotatedReference, MarkupError};
pub use bleu::{corpus_bleu, BleuScore, MAX_ORDER, SMOOTHING_EPSILON};
pub use formality::{
    classify_hypothesis, classify_hypothesis_with, formality_accuracy, formality_accuracy_with, verdicts,
    AccuracyReport, ClassCounts, HypothesisVerdict, MatchOptions, TargetLevel,
};
pub use ter::{contrastiveness, edit_distance, mean_ter, ter};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("{hypotheses} hypotheses but {references} references")]
    LengthMismatch { hypotheses: usize, references: usize },
    #[error("no hypotheses to score")]
    EmptyCorpus,
    #[error("reference is empty")]
    EmptyReference,
    #[error("no hypothesis matched either level ({0})")]
    DegenerateDenominator(ClassCounts),
    #[error("unknown target level `{0}`")]
    UnknownTarget(String),
}

impl MetricsError {
    pub fn name(&self) -> &'static str {
        match self {
            MetricsError::LengthMismatch { .. } => "LengthMismatch",
            MetricsError::EmptyCorpus => "EmptyCorpus",
            MetricsError::EmptyReference => "EmptyReference",
            MetricsError::DegenerateDenominator(_) => "DegenerateDenominator",
            MetricsError::UnknownTarget(_) => "UnknownTarget",
        }
    }
}
