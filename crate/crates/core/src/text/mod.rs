//! Shared domain types, tokenization and corpus I/O.

mod corpus;
mod tokenize;
mod types;

pub use corpus::{
    read_jsonl_corpus, read_tsv_bitext, write_jsonl, BitextRecord, JsonlReader, PairedRecord, RecordError,
    RecordErrorKind, Schema,
};
pub use tokenize::{
    tokenize_13a, tokenizer_by_name, tokenizer_for, whitespace_tokenize, word_tokens, Tokenizer, Tokenizer13a,
    WhitespaceTokenizer, WordToken,
};
pub use types::{
    nfc, FormalityLabel, LabeledTriplet, Lang, LanguageSet, PairedContrastiveExample, Provenance, Segment,
};

use crate::metrics::MarkupError;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum TextError {
    #[error("invalid language code `{0}`")]
    InvalidLanguageCode(String),
    #[error("invalid formality label `{0}`")]
    InvalidLabel(String),
    #[error("label `{0}` cannot be stored in a training set")]
    UntrainableLabel(FormalityLabel),
    #[error("reference text is empty")]
    EmptyReference,
    #[error(transparent)]
    Markup(#[from] MarkupError),
}
