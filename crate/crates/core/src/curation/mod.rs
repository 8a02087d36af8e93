//! Synthetic supervision: label raw bitext, cap each (language, level)
//! bucket, and build paired, unpaired and dev sets.

mod sample;

use std::collections::{BTreeMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use sample::{dev_split, make_unpaired, subsample_paired};

use crate::classifier::{silver_label, ExternalScores, FormalityScorer, LinearNGramModel, SilverPolicy};
use crate::pool::WorkerPool;
use crate::rules::{label_formality, RuleSet, RulesError};
use crate::text::{BitextRecord, FormalityLabel, LabeledTriplet, Lang, Provenance, RecordError};

const CHUNK: usize = 4096;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum CurationError {
    #[error("no labeler for language `{0}`")]
    UnsupportedLanguage(Lang),
    #[error("{0}")]
    Io(RecordError),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("domain `{domain}` has {available} examples, {needed} needed")]
    InsufficientExamples { domain: String, available: usize, needed: usize },
    #[error("fraction {0} outside (0, 1]")]
    InvalidFraction(f64),
    #[error(transparent)]
    Rules(#[from] RulesError),
}

impl CurationError {
    pub fn name(&self) -> &'static str {
        match self {
            CurationError::UnsupportedLanguage(_) => "UnsupportedLanguage",
            CurationError::Io(_) => "Io",
            CurationError::InvalidConfig(_) => "InvalidConfig",
            CurationError::InsufficientExamples { .. } => "InsufficientExamples",
            CurationError::InvalidFraction(_) => "InvalidFraction",
            CurationError::Rules(e) => e.name(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelerKind {
    #[default]
    Rules,
    Classifier,
    External,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CapMode {
    /// Keep the first `cap` candidates in stream order.
    #[default]
    First,
    /// Keep a uniform seeded sample of `cap` candidates.
    Reservoir,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurationConfig {
    pub cap_per_level: usize,
    /// Empty means every language the labeler supports.
    pub languages: Vec<Lang>,
    pub labeler: LabelerKind,
    pub seed: u64,
    pub dev_per_domain: usize,
    pub cap_mode: CapMode,
    pub dedup: bool,
    pub workers: usize,
}

impl Default for CurationConfig {
    fn default() -> Self {
        CurationConfig {
            cap_per_level: 7500,
            languages: Vec::new(),
            labeler: LabelerKind::Rules,
            seed: 0,
            dev_per_domain: 50,
            cap_mode: CapMode::First,
            dedup: true,
            workers: 1,
        }
    }
}

impl CurationConfig {
    pub fn validate(&self) -> Result<(), CurationError> {
        if self.cap_per_level == 0 {
            return Err(CurationError::InvalidConfig("cap_per_level must be positive".into()));
        }
        Ok(())
    }
}

pub enum Labeler {
    Rules(Vec<RuleSet>),
    Classifier(LinearNGramModel, SilverPolicy),
    External(ExternalScores, SilverPolicy),
}

/// What the labeler made of one record.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Label(FormalityLabel),
    Drop(DropReason),
}

impl Labeler {
    pub fn kind(&self) -> LabelerKind {
        match self {
            Labeler::Rules(_) => LabelerKind::Rules,
            Labeler::Classifier(..) => LabelerKind::Classifier,
            Labeler::External(..) => LabelerKind::External,
        }
    }

    pub fn provenance(&self) -> Provenance {
        match self {
            Labeler::Rules(_) => Provenance::Rule,
            _ => Provenance::Classifier,
        }
    }

    pub fn label(&self, record: &BitextRecord) -> Result<Verdict, CurationError> {
        let scored = |scorer: &dyn FormalityScorer, policy: &SilverPolicy| {
            let id = record.id();
            match scorer.p_formal(id.as_deref(), &record.target_segment()) {
                None => Verdict::Drop(DropReason::Unscored),
                Some(p) => match silver_label(p, policy) {
                    Some(l) => Verdict::Label(l),
                    None => Verdict::Drop(DropReason::DeadZone),
                },
            }
        };
        Ok(match self {
            Labeler::Rules(sets) => {
                let rs = sets
                    .iter()
                    .find(|r| r.lang() == &record.lang)
                    .ok_or_else(|| CurationError::UnsupportedLanguage(record.lang.clone()))?;
                match label_formality(&record.target_segment(), rs)? {
                    FormalityLabel::Unknown => Verdict::Drop(DropReason::Unknown),
                    FormalityLabel::Conflict => Verdict::Drop(DropReason::Conflict),
                    l => Verdict::Label(l),
                }
            }
            Labeler::Classifier(m, policy) => scored(m, policy),
            Labeler::External(s, policy) => scored(s, policy),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    Unknown,
    Conflict,
    DeadZone,
    Unscored,
    Duplicate,
    Cap,
    OtherLanguage,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bucket {
    Formal,
    Informal,
    Unlabeled,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellCounts {
    pub seen: usize,
    pub accepted: usize,
    pub dropped: BTreeMap<DropReason, usize>,
}

impl CellCounts {
    pub fn dropped_total(&self) -> usize {
        self.dropped.values().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportRow {
    pub lang: Lang,
    pub level: Bucket,
    #[serde(flatten)]
    pub counts: CellCounts,
}

/// Per (language, level) accounting. Every well-formed input record is
/// counted in exactly one cell, as accepted or dropped with a reason.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CurationReport {
    cells: BTreeMap<(Lang, Bucket), CellCounts>,
    /// Lines that could not be parsed.
    pub malformed: usize,
}

impl CurationReport {
    pub fn cell(&self, lang: &Lang, level: Bucket) -> CellCounts {
        self.cells.get(&(lang.clone(), level)).cloned().unwrap_or_default()
    }

    pub fn rows(&self) -> Vec<ReportRow> {
        self.cells
            .iter()
            .map(|((lang, level), c)| ReportRow { lang: lang.clone(), level: *level, counts: c.clone() })
            .collect()
    }

    pub fn seen(&self) -> usize {
        self.cells.values().map(|c| c.seen).sum()
    }

    pub fn accepted(&self) -> usize {
        self.cells.values().map(|c| c.accepted).sum()
    }

    pub fn dropped(&self) -> usize {
        self.cells.values().map(CellCounts::dropped_total).sum()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({ "cells": self.rows(), "malformed": self.malformed })
    }

    fn entry(&mut self, lang: &Lang, level: Bucket) -> &mut CellCounts {
        self.cells.entry((lang.clone(), level)).or_default()
    }

    fn drop(&mut self, lang: &Lang, level: Bucket, reason: DropReason) {
        *self.entry(lang, level).dropped.entry(reason).or_insert(0) += 1;
    }
}

fn bucket(label: FormalityLabel) -> Bucket {
    match label {
        FormalityLabel::Formal => Bucket::Formal,
        FormalityLabel::Informal => Bucket::Informal,
        _ => Bucket::Unlabeled,
    }
}

struct Reservoir {
    /// (sequence number, triplet)
    kept: Vec<(usize, LabeledTriplet)>,
    offered: usize,
}

/// Labels `records` and keeps at most `cap_per_level` triplets per
/// (language, level). Unparseable lines are counted; I/O errors abort.
pub fn curate<I>(
    records: I,
    labeler: &Labeler,
    config: &CurationConfig,
) -> Result<(Vec<LabeledTriplet>, CurationReport), CurationError>
where
    I: IntoIterator<Item = Result<BitextRecord, RecordError>>,
{
    config.validate()?;
    let pool = WorkerPool::new(config.workers);
    let mut report = CurationReport::default();
    let mut seen_sources: HashSet<(Lang, String)> = HashSet::new();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut first: Vec<LabeledTriplet> = Vec::new();
    let mut reservoirs: BTreeMap<(Lang, Bucket), Reservoir> = BTreeMap::new();
    let mut seq = 0usize;

    let mut input = records.into_iter();
    loop {
        let mut chunk = Vec::with_capacity(CHUNK);
        let mut done = false;
        while chunk.len() < CHUNK {
            match input.next() {
                None => {
                    done = true;
                    break;
                }
                Some(Err(e)) if e.is_io() => return Err(CurationError::Io(e)),
                Some(Err(_)) => report.malformed += 1,
                Some(Ok(r)) => chunk.push(r),
            }
        }
        let labeled = pool.map(chunk, |r| {
            if !config.languages.is_empty() && !config.languages.contains(&r.lang) {
                return Ok((r, Verdict::Drop(DropReason::OtherLanguage)));
            }
            labeler.label(&r).map(|v| (r, v))
        });
        for item in labeled {
            let (record, verdict) = item?;
            let lang = record.lang.clone();
            let label = match verdict {
                Verdict::Drop(reason) => {
                    report.entry(&lang, Bucket::Unlabeled).seen += 1;
                    report.drop(&lang, Bucket::Unlabeled, reason);
                    continue;
                }
                Verdict::Label(l) => l,
            };
            let level = bucket(label);
            report.entry(&lang, level).seen += 1;
            if config.dedup && !seen_sources.insert((lang.clone(), record.source.clone())) {
                report.drop(&lang, level, DropReason::Duplicate);
                continue;
            }
            let triplet =
                LabeledTriplet::new(record.source_segment(), record.target_segment(), label, labeler.provenance())
                    .expect("labeler returns trainable labels");
            match config.cap_mode {
                CapMode::First => {
                    let cell = report.entry(&lang, level);
                    if cell.accepted < config.cap_per_level {
                        cell.accepted += 1;
                        first.push(triplet);
                    } else {
                        report.drop(&lang, level, DropReason::Cap);
                    }
                }
                CapMode::Reservoir => {
                    let res = reservoirs
                        .entry((lang.clone(), level))
                        .or_insert_with(|| Reservoir { kept: Vec::new(), offered: 0 });
                    let k = res.offered;
                    res.offered += 1;
                    if res.kept.len() < config.cap_per_level {
                        res.kept.push((seq, triplet));
                    } else {
                        let j = rng.gen_range(0..=k);
                        if j < config.cap_per_level {
                            res.kept[j] = (seq, triplet);
                        }
                        report.drop(&lang, level, DropReason::Cap);
                    }
                    seq += 1;
                }
            }
        }
        if done {
            break;
        }
    }

    let out = match config.cap_mode {
        CapMode::First => first,
        CapMode::Reservoir => {
            let mut all: Vec<(usize, LabeledTriplet)> = Vec::new();
            for ((lang, level), res) in reservoirs {
                report.entry(&lang, level).accepted += res.kept.len();
                all.extend(res.kept);
            }
            all.sort_by_key(|(s, _)| *s);
            all.into_iter().map(|(_, t)| t).collect()
        }
    };
    Ok((out, report))
}
