use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::CurationError;
use crate::text::{FormalityLabel, LabeledTriplet, PairedContrastiveExample, Provenance};

/// One triplet per source, its level picked by a seeded fair coin. Neutral
/// pairs become `Neutral` triplets.
pub fn make_unpaired(paired: &[PairedContrastiveExample], seed: u64) -> Vec<LabeledTriplet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    paired
        .iter()
        .map(|ex| {
            let formal = rng.gen_bool(0.5);
            let (target, label) = match (formal, ex.is_neutral()) {
                (true, false) => (ex.formal_target(), FormalityLabel::Formal),
                (false, false) => (ex.informal_target(), FormalityLabel::Informal),
                (true, true) => (ex.formal_target(), FormalityLabel::Neutral),
                (false, true) => (ex.informal_target(), FormalityLabel::Neutral),
            };
            LabeledTriplet { source: ex.source.clone(), target, label, provenance: Provenance::Gold }
        })
        .collect()
}

/// Keeps `floor(fraction * n)` whole pairs, chosen by a seeded shuffle and
/// returned in corpus order.
pub fn subsample_paired(
    paired: &[PairedContrastiveExample],
    fraction: f64,
    seed: u64,
) -> Result<Vec<PairedContrastiveExample>, CurationError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(CurationError::InvalidFraction(fraction));
    }
    let keep = (fraction * paired.len() as f64).floor() as usize;
    let mut idx: Vec<usize> = (0..paired.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx.truncate(keep);
    idx.sort_unstable();
    Ok(idx.into_iter().map(|i| paired[i].clone()).collect())
}

/// Splits off the last `k` examples of every domain as the dev set.
/// Both halves keep corpus order.
pub fn dev_split(
    paired: &[PairedContrastiveExample],
    k: usize,
) -> Result<(Vec<PairedContrastiveExample>, Vec<PairedContrastiveExample>), CurationError> {
    let mut domains: Vec<(&str, Vec<usize>)> = Vec::new();
    for (i, ex) in paired.iter().enumerate() {
        match domains.iter_mut().find(|(d, _)| *d == ex.domain) {
            Some((_, v)) => v.push(i),
            None => domains.push((&ex.domain, vec![i])),
        }
    }
    let mut is_dev = vec![false; paired.len()];
    for (domain, idx) in &domains {
        if idx.len() < k {
            return Err(CurationError::InsufficientExamples {
                domain: domain.to_string(),
                available: idx.len(),
                needed: k,
            });
        }
        for &i in &idx[idx.len() - k..] {
            is_dev[i] = true;
        }
    }
    let (mut train, mut dev) = (Vec::new(), Vec::new());
    for (ex, d) in paired.iter().zip(is_dev) {
        if d {
            dev.push(ex.clone())
        } else {
            train.push(ex.clone())
        }
    }
    Ok((train, dev))
}
