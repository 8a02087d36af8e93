//! TER without block shifts ("TER-noshift").
//!
//! Word-level Levenshtein distance with unit costs, divided by the reference
//! length. Shift moves of full TER are not searched, so scores are an upper
//! bound on full TER.

use super::MetricsError;
use crate::text::Tokenizer;

/// Minimum number of insertions, deletions and substitutions turning `a` into `b`.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn ter<T: PartialEq>(hyp: &[T], reference: &[T]) -> Result<f64, MetricsError> {
    if reference.is_empty() {
        return Err(MetricsError::EmptyReference);
    }
    Ok(edit_distance(hyp, reference) as f64 / reference.len() as f64)
}

/// Mean TER-noshift of each informal output against its formal counterpart.
pub fn contrastiveness(
    formal_outputs: &[impl AsRef<str>],
    informal_outputs: &[impl AsRef<str>],
    tokenizer: &dyn Tokenizer,
) -> Result<f64, MetricsError> {
    if formal_outputs.len() != informal_outputs.len() {
        return Err(MetricsError::LengthMismatch {
            hypotheses: informal_outputs.len(),
            references: formal_outputs.len(),
        });
    }
    mean_ter(informal_outputs, formal_outputs, tokenizer)
}

/// Mean sentence-level TER-noshift of `hyps` against `refs`.
pub fn mean_ter(
    hyps: &[impl AsRef<str>],
    refs: &[impl AsRef<str>],
    tokenizer: &dyn Tokenizer,
) -> Result<f64, MetricsError> {
    if hyps.len() != refs.len() {
        return Err(MetricsError::LengthMismatch { hypotheses: hyps.len(), references: refs.len() });
    }
    if hyps.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let mut sum = 0.0;
    for (h, r) in hyps.iter().zip(refs) {
        sum += ter(&tokenizer.tokenize(h.as_ref()), &tokenizer.tokenize(r.as_ref()))?;
    }
    Ok(sum / hyps.len() as f64)
}
