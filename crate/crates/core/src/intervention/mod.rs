//! A desk-scale encoder-decoder with additive formality vectors, its
//! training loop and a synthetic contrastive language to train it on.

pub mod checkpoint;
mod model;
pub mod tape;
pub mod toylang;
mod train;
pub mod vocab;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use model::{Example, Forward, ModelConfig, Style, ToyInterventionModel};
pub use toylang::{gen_toylang, gen_toylang_with, strip_markers, toy_lang, ToyConfig, TOY_LANG};
pub use train::{
    evaluate_toy, mask_style, resample_mixture, train, train_two_pass, EpochMetrics, SecondStage, ToyEval, TrainConfig,
    TrainOutcome,
};
pub use vocab::Vocab;

use crate::metrics::MetricsError;
use crate::text::FormalityLabel;

#[derive(Debug, thiserror::Error)]
pub enum InterventionError {
    #[error("formality level {0} has no style vector")]
    UnknownLevel(FormalityLabel),
    #[error("empty input")]
    EmptyInput,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("training diverged at stage {stage}, epoch {epoch}")]
    TrainingDiverged { stage: usize, epoch: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl InterventionError {
    pub fn name(&self) -> &'static str {
        match self {
            InterventionError::UnknownLevel(_) => "UnknownLevel",
            InterventionError::EmptyInput => "EmptyInput",
            InterventionError::InvalidConfig(_) => "InvalidConfig",
            InterventionError::TrainingDiverged { .. } => "TrainingDiverged",
            InterventionError::Checkpoint(_) => "Checkpoint",
            InterventionError::Io(_) => "Io",
            InterventionError::Metrics(e) => e.name(),
        }
    }
}
