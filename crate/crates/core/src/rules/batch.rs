use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{label_formality, RuleSet, RulesError};
use crate::pool::WorkerPool;
use crate::text::{BitextRecord, FormalityLabel, RecordError, Segment};

const CHUNK: usize = 1024;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub formal: usize,
    pub informal: usize,
    pub unknown: usize,
    pub conflict: usize,
}

impl LabelCounts {
    pub fn add(&mut self, label: FormalityLabel) {
        match label {
            FormalityLabel::Formal => self.formal += 1,
            FormalityLabel::Informal => self.informal += 1,
            FormalityLabel::Conflict => self.conflict += 1,
            FormalityLabel::Unknown | FormalityLabel::Neutral => self.unknown += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.formal + self.informal + self.unknown + self.conflict
    }
}

/// Something with a target-language segment to label.
pub trait Labelable {
    fn segment(&self) -> Segment;
}

impl Labelable for BitextRecord {
    fn segment(&self) -> Segment {
        self.target_segment()
    }
}

impl Labelable for Segment {
    fn segment(&self) -> Segment {
        self.clone()
    }
}

/// Streaming labeler returned by [`batch_label`]. Records are pulled in
/// chunks, labeled on the worker pool, and yielded in input order. Read
/// errors are passed through at their position in the stream.
pub struct BatchLabeler<'r, I, T> {
    input: I,
    ruleset: &'r RuleSet,
    pool: WorkerPool,
    ready: VecDeque<Result<(T, FormalityLabel), RulesError>>,
    counts: LabelCounts,
    exhausted: bool,
}

pub fn batch_label<I, T>(records: I, ruleset: &RuleSet, workers: usize) -> BatchLabeler<'_, I::IntoIter, T>
where
    I: IntoIterator<Item = Result<T, RecordError>>,
{
    BatchLabeler {
        input: records.into_iter(),
        ruleset,
        pool: WorkerPool::new(workers),
        ready: VecDeque::new(),
        counts: LabelCounts::default(),
        exhausted: false,
    }
}

impl<I, T> BatchLabeler<'_, I, T>
where
    I: Iterator<Item = Result<T, RecordError>>,
    T: Labelable + Send,
{
    /// Counts over the records yielded so far.
    pub fn counts(&self) -> LabelCounts {
        self.counts
    }

    /// Drains the stream, returning all labeled records and the counts.
    /// Stops at the first error.
    pub fn collect_all(mut self) -> Result<(Vec<(T, FormalityLabel)>, LabelCounts), RulesError> {
        let mut out = Vec::new();
        for item in self.by_ref() {
            out.push(item?);
        }
        Ok((out, self.counts))
    }

    fn fill(&mut self) {
        let mut chunk = Vec::with_capacity(CHUNK);
        let mut error = None;
        while chunk.len() < CHUNK {
            match self.input.next() {
                Some(Ok(r)) => chunk.push(r),
                Some(Err(e)) => {
                    error = Some(e);
                    break;
                }
                None => {
                    self.exhausted = true;
                    break;
                }
            }
        }
        let rs = self.ruleset;
        let labeled = self.pool.map(chunk, |r| {
            let l = label_formality(&r.segment(), rs);
            l.map(|l| (r, l))
        });
        self.ready.extend(labeled);
        if let Some(e) = error {
            self.ready.push_back(Err(e.into()));
        }
    }
}

impl<I, T> Iterator for BatchLabeler<'_, I, T>
where
    I: Iterator<Item = Result<T, RecordError>>,
    T: Labelable + Send,
{
    type Item = Result<(T, FormalityLabel), RulesError>;

    fn next(&mut self) -> Option<Self::Item> {
        while self.ready.is_empty() && !self.exhausted {
            self.fill();
        }
        let item = self.ready.pop_front()?;
        if let Ok((_, l)) = &item {
            self.counts.add(*l);
        }
        Some(item)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::builtin;
    use crate::text::{Lang, RecordErrorKind};

    fn de() -> Lang {
        Lang::new("de").unwrap()
    }

    fn fixture() -> Vec<Segment> {
        ["Woher kommen Sie?", "Woher kommst du?", "Ich gehe nach Hause.", "Können Sie mir sagen, was du willst?"]
            .iter()
            .map(|t| Segment::new(t, de()))
            .collect()
    }

    #[test]
    fn empty_corpus() {
        let rs = builtin(&de()).unwrap();
        let (out, counts) = batch_label(Vec::<Result<Segment, _>>::new(), &rs, 1).collect_all().unwrap();
        assert!(out.is_empty());
        assert_eq!(counts, LabelCounts::default());
    }

    #[test]
    fn one_of_each() {
        let rs = builtin(&de()).unwrap();
        let (out, counts) = batch_label(fixture().into_iter().map(Ok), &rs, 1).collect_all().unwrap();
        assert_eq!(counts, LabelCounts { formal: 1, informal: 1, unknown: 1, conflict: 1 });
        let labels: Vec<_> = out.iter().map(|(_, l)| *l).collect();
        use FormalityLabel::*;
        assert_eq!(labels, [Formal, Informal, Unknown, Conflict]);
    }

    #[test]
    fn shuffled_and_parallel_counts_agree() {
        let rs = builtin(&de()).unwrap();
        let mut many: Vec<Segment> = (0..3000).map(|i| fixture()[i % 4].clone()).collect();
        let (seq, c1) = batch_label(many.clone().into_iter().map(Ok), &rs, 1).collect_all().unwrap();
        let (par, c2) = batch_label(many.clone().into_iter().map(Ok), &rs, 3).collect_all().unwrap();
        assert_eq!(seq, par);
        many.reverse();
        let (_, c3) = batch_label(many.into_iter().map(Ok), &rs, 2).collect_all().unwrap();
        assert_eq!(c1, c2);
        assert_eq!(c1, c3);
        assert_eq!(c1.total(), 3000);
    }

    #[test]
    fn read_errors_keep_position() {
        let rs = builtin(&de()).unwrap();
        let input = vec![
            Ok(fixture()[0].clone()),
            Err(RecordError { line: 2, kind: RecordErrorKind::InvalidJson("x".into()) }),
            Ok(fixture()[1].clone()),
        ];
        let items: Vec<_> = batch_label(input, &rs, 2).collect();
        assert!(items[0].is_ok());
        assert!(matches!(&items[1], Err(RulesError::Record(e)) if e.line == 2));
        assert!(items[2].is_ok());
    }
}
