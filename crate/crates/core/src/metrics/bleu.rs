//! Corpus BLEU with a single reference per hypothesis.
//!
//! Clipped n-gram counts (n = 1..4) are summed over the corpus. Orders with
//! no hypothesis n-grams at all are left out of the geometric mean. An order
//! whose match count is zero gets `SMOOTHING_EPSILON` matches instead, so a
//! corpus without overlap scores a tiny positive value rather than a log of
//! zero.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::text::Tokenizer;

pub const MAX_ORDER: usize = 4;
pub const SMOOTHING_EPSILON: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BleuScore {
    /// 0..=100
    pub score: f64,
    pub precisions: [f64; MAX_ORDER],
    pub matches: [usize; MAX_ORDER],
    pub totals: [usize; MAX_ORDER],
    pub brevity_penalty: f64,
    pub sys_len: usize,
    pub ref_len: usize,
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut m = HashMap::new();
    for w in tokens.windows(n) {
        *m.entry(w).or_insert(0) += 1;
    }
    m
}

pub fn corpus_bleu(
    hyps: &[impl AsRef<str>],
    refs: &[impl AsRef<str>],
    tokenizer: &dyn Tokenizer,
) -> Result<BleuScore, MetricsError> {
    if hyps.len() != refs.len() {
        return Err(MetricsError::LengthMismatch { hypotheses: hyps.len(), references: refs.len() });
    }
    let mut matches = [0usize; MAX_ORDER];
    let mut totals = [0usize; MAX_ORDER];
    let (mut sys_len, mut ref_len) = (0, 0);
    for (h, r) in hyps.iter().zip(refs) {
        let ht = tokenizer.tokenize(h.as_ref());
        let rt = tokenizer.tokenize(r.as_ref());
        sys_len += ht.len();
        ref_len += rt.len();
        for n in 1..=MAX_ORDER {
            let rc = ngram_counts(&rt, n);
            for (g, c) in ngram_counts(&ht, n) {
                matches[n - 1] += c.min(rc.get(g).copied().unwrap_or(0));
            }
            totals[n - 1] += ht.len().saturating_sub(n - 1);
        }
    }

    let mut precisions = [0.0; MAX_ORDER];
    let mut log_sum = 0.0;
    let mut orders = 0;
    for n in 0..MAX_ORDER {
        if totals[n] == 0 {
            continue;
        }
        let m = if matches[n] == 0 { SMOOTHING_EPSILON } else { matches[n] as f64 };
        precisions[n] = m / totals[n] as f64;
        log_sum += precisions[n].ln();
        orders += 1;
    }
    if sys_len == 0 || orders == 0 {
        return Ok(BleuScore { score: 0.0, precisions, matches, totals, brevity_penalty: 0.0, sys_len, ref_len });
    }
    let brevity_penalty = if sys_len < ref_len { (1.0 - ref_len as f64 / sys_len as f64).exp() } else { 1.0 };
    let score = 100.0 * brevity_penalty * (log_sum / orders as f64).exp();
    Ok(BleuScore { score: score.min(100.0), precisions, matches, totals, brevity_penalty, sys_len, ref_len })
}
