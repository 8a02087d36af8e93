use ndarray::Zip;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{Example, ModelConfig, Style, ToyInterventionModel};
use super::tape::Mat;
use super::toylang::strip_markers;
use super::vocab::Vocab;
use super::InterventionError;
use crate::metrics::{contrastiveness, corpus_bleu, formality_accuracy, TargetLevel};
use crate::text::{tokenizer_for, FormalityLabel, LabeledTriplet, Lang, PairedContrastiveExample};

/// Finetuning over a mixture of gold triplets and a resample of the first
/// stage's data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SecondStage {
    pub epochs: usize,
    pub learning_rate: f64,
    pub mask_prob: f64,
    /// How many first-stage triplets join the gold data.
    pub resample: usize,
    /// Target languages whose labels are always masked.
    pub full_mask_langs: Vec<Lang>,
}

impl Default for SecondStage {
    fn default() -> Self {
        SecondStage { epochs: 5, learning_rate: 1e-3, mask_prob: 0.2, resample: 1000, full_mask_langs: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub warmup_steps: usize,
    pub clip_norm: f64,
    pub mask_prob: f64,
    pub seed: u64,
    pub two_pass: Option<SecondStage>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelConfig::default(),
            batch_size: 32,
            epochs: 8,
            learning_rate: 3e-3,
            warmup_steps: 50,
            clip_norm: 1.0,
            mask_prob: 0.2,
            seed: 0,
            two_pass: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), InterventionError> {
        self.model.validate()?;
        let bad = |m: String| Err(InterventionError::InvalidConfig(m));
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        let stages = std::iter::once((self.mask_prob, self.learning_rate))
            .chain(self.two_pass.iter().map(|s| (s.mask_prob, s.learning_rate)));
        for (p, lr) in stages {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("mask_prob {p} is outside [0, 1]"));
            }
            if !(lr >= 0.0 && lr.is_finite()) {
                return bad(format!("learning rate {lr} is invalid"));
            }
        }
        Ok(())
    }

    /// A freshly initialized model whose vocabulary covers `corpora`.
    pub fn build_model(&self, corpora: &[&[LabeledTriplet]]) -> Result<ToyInterventionModel, InterventionError> {
        let all = || corpora.iter().flat_map(|c| c.iter());
        let vocab = Vocab::build(
            all().flat_map(|t| [t.source.text(), t.target.text()]),
            all().map(|t| t.target.lang().clone()),
        );
        ToyInterventionModel::new(self.model.clone(), vocab, self.seed)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub stage: usize,
    pub epoch: usize,
    /// Token-weighted mean training loss over the epoch.
    pub loss: f64,
    pub tokens: usize,
    pub examples: usize,
    /// Examples trained with the neutral vector after masking.
    pub masked: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub epochs: Vec<EpochMetrics>,
}

impl TrainOutcome {
    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.loss)
    }
}

/// Replaces a formal or informal label by `Neutral` with probability
/// `mask_prob`. One draw is consumed per call.
pub fn mask_style<R: Rng + ?Sized>(f: FormalityLabel, mask_prob: f64, rng: &mut R) -> FormalityLabel {
    let hit = rng.gen::<f64>() < mask_prob;
    match f {
        FormalityLabel::Formal | FormalityLabel::Informal if hit => FormalityLabel::Neutral,
        other => other,
    }
}

/// `gold` followed by up to `n` triplets drawn without replacement from
/// `synthetic`.
pub fn resample_mixture(
    gold: &[LabeledTriplet],
    synthetic: &[LabeledTriplet],
    n: usize,
    seed: u64,
) -> Vec<LabeledTriplet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = gold.to_vec();
    out.extend(synthetic.choose_multiple(&mut rng, n.min(synthetic.len())).cloned());
    out
}

struct Adam {
    m: Vec<Mat>,
    v: Vec<Mat>,
    t: i32,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.98;
const ADAM_EPS: f64 = 1e-9;

impl Adam {
    fn new(model: &ToyInterventionModel) -> Self {
        Adam { m: model.params().zeros_like(), v: model.params().zeros_like(), t: 0 }
    }

    fn step(&mut self, params: &mut [Mat], grads: &[Mat], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t);
        let c2 = 1.0 - BETA2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                *m = BETA1 * *m + (1.0 - BETA1) * g;
                *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
            });
        }
    }
}

fn clip(grads: &mut [Mat], max_norm: f64) {
    if max_norm <= 0.0 {
        return;
    }
    let norm = grads.iter().map(|g| g.iter().map(|x| x * x).sum::<f64>()).sum::<f64>().sqrt();
    if norm > max_norm {
        for g in grads {
            *g *= max_norm / norm;
        }
    }
}

struct Stage<'a> {
    index: usize,
    data: &'a [(Example, f64)],
    epochs: usize,
    learning_rate: f64,
}

fn run_stage(
    model: &mut ToyInterventionModel,
    stage: Stage<'_>,
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
    log: &mut Vec<EpochMetrics>,
) -> Result<(), InterventionError> {
    let mut adam = Adam::new(model);
    let mut order: Vec<usize> = (0..stage.data.len()).collect();
    let mut step = 0usize;
    for epoch in 1..=stage.epochs {
        order.shuffle(rng);
        let (mut weighted, mut tokens, mut masked) = (0.0, 0, 0);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<Example> = chunk
                .iter()
                .map(|&i| {
                    let (ex, p) = &stage.data[i];
                    let style = Style::try_from(mask_style(ex.style.into(), *p, rng)).expect("trainable label");
                    Example { style, ..ex.clone() }
                })
                .collect();
            masked += batch.iter().zip(chunk).filter(|(b, &i)| b.style != stage.data[i].0.style).count();
            let (loss, mut grads, n) = model.loss_and_grads(&batch)?;
            if !loss.is_finite() {
                return Err(InterventionError::TrainingDiverged { stage: stage.index, epoch });
            }
            clip(&mut grads, config.clip_norm);
            step += 1;
            let warm = if config.warmup_steps == 0 { 1.0 } else { (step as f64 / config.warmup_steps as f64).min(1.0) };
            adam.step(model.params_mut().values_mut(), &grads, stage.learning_rate * warm);
            weighted += loss * n as f64;
            tokens += n;
        }
        if !model.params().all_finite() {
            return Err(InterventionError::TrainingDiverged { stage: stage.index, epoch });
        }
        let m = EpochMetrics {
            stage: stage.index,
            epoch,
            loss: weighted / tokens as f64,
            tokens,
            examples: stage.data.len(),
            masked,
        };
        log::debug!("stage {} epoch {} loss {:.5}", m.stage, m.epoch, m.loss);
        log.push(m);
    }
    Ok(())
}

fn prepare(
    model: &ToyInterventionModel,
    corpus: &[LabeledTriplet],
    prob: impl Fn(&LabeledTriplet) -> f64,
) -> Result<Vec<(Example, f64)>, InterventionError> {
    corpus.iter().map(|t| Ok((model.example(t)?, prob(t)))).collect()
}

/// Single-stage training, followed by a second stage over a resample of
/// `corpus` when `config.two_pass` is set.
pub fn train(
    model: &mut ToyInterventionModel,
    corpus: &[LabeledTriplet],
    config: &TrainConfig,
) -> Result<TrainOutcome, InterventionError> {
    train_two_pass(model, corpus, &[], config)
}

/// Trains on `first`; with `config.two_pass`, continues on `gold` mixed with
/// a resample of `first`. Masking is redrawn for every example and epoch.
pub fn train_two_pass(
    model: &mut ToyInterventionModel,
    first: &[LabeledTriplet],
    gold: &[LabeledTriplet],
    config: &TrainConfig,
) -> Result<TrainOutcome, InterventionError> {
    config.validate()?;
    if first.is_empty() {
        return Err(InterventionError::EmptyInput);
    }
    if model.config() != &config.model {
        return Err(InterventionError::InvalidConfig("model shape differs from the training config".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut log = Vec::new();
    let data = prepare(model, first, |_| config.mask_prob)?;
    run_stage(
        model,
        Stage { index: 1, data: &data, epochs: config.epochs, learning_rate: config.learning_rate },
        config,
        &mut rng,
        &mut log,
    )?;
    if let Some(second) = &config.two_pass {
        let mixture = resample_mixture(gold, first, second.resample, rng.gen());
        let data = prepare(model, &mixture, |t| {
            if second.full_mask_langs.contains(t.target.lang()) {
                1.0
            } else {
                second.mask_prob
            }
        })?;
        let stage = Stage { index: 2, data: &data, epochs: second.epochs, learning_rate: second.learning_rate };
        run_stage(model, stage, config, &mut rng, &mut log)?;
    }
    Ok(TrainOutcome { epochs: log })
}

/// Held-out evaluation of a toy model through the scoring functions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyEval {
    pub acc_formal: f64,
    pub acc_informal: f64,
    pub bleu_formal: f64,
    pub bleu_informal: f64,
    /// Mean TER between the informal and formal decodes.
    pub contrast_ter: f64,
    /// Share of non-neutral sources whose two decodes differ only in
    /// marker tokens.
    pub marker_only: f64,
    /// Neutral sources whose neutral-vector decode equals a reference.
    pub neutral_match: f64,
    pub formal_outputs: Vec<String>,
    pub informal_outputs: Vec<String>,
}

pub fn evaluate_toy(
    model: &ToyInterventionModel,
    pairs: &[PairedContrastiveExample],
    max_len: usize,
) -> Result<ToyEval, InterventionError> {
    if pairs.is_empty() {
        return Err(InterventionError::EmptyInput);
    }
    let srcs: Vec<Vec<usize>> = pairs.iter().map(|p| model.encode_source(p.source.text(), &p.target_lang)).collect();
    let run = |style: Style| -> Result<Vec<String>, InterventionError> {
        let items: Vec<(Vec<usize>, Style)> = srcs.iter().map(|s| (s.clone(), style)).collect();
        Ok(model.decode_batch(&items, max_len)?.iter().map(|ids| model.vocab().decode(ids)).collect())
    };
    let formal = run(Style::Formal)?;
    let informal = run(Style::Informal)?;
    let neutral_idx: Vec<usize> = (0..pairs.len()).filter(|&i| pairs[i].is_neutral()).collect();
    let neutral_out = {
        let items: Vec<(Vec<usize>, Style)> = neutral_idx.iter().map(|&i| (srcs[i].clone(), Style::Neutral)).collect();
        model.decode_batch(&items, max_len)?
    };
    let f_refs: Vec<_> = pairs.iter().map(|p| p.formal_ref.clone()).collect();
    let i_refs: Vec<_> = pairs.iter().map(|p| p.informal_ref.clone()).collect();
    let tok = tokenizer_for(&pairs[0].target_lang);
    let acc_formal = formality_accuracy(&formal, &f_refs, &i_refs, TargetLevel::Formal)?.acc_formal;
    let acc_informal = formality_accuracy(&informal, &f_refs, &i_refs, TargetLevel::Informal)?.acc_informal;
    let f_text: Vec<&str> = f_refs.iter().map(|r| r.text()).collect();
    let i_text: Vec<&str> = i_refs.iter().map(|r| r.text()).collect();
    let bleu_formal = corpus_bleu(&formal, &f_text, tok)?.score;
    let bleu_informal = corpus_bleu(&informal, &i_text, tok)?.score;
    let contrast_ter = contrastiveness(&formal, &informal, tok)?;
    let contrastive: Vec<usize> = (0..pairs.len()).filter(|&i| !pairs[i].is_neutral()).collect();
    let marker_only = contrastive
        .iter()
        .filter(|&&i| formal[i] != informal[i] && strip_markers(&formal[i]) == strip_markers(&informal[i]))
        .count() as f64
        / contrastive.len().max(1) as f64;
    let neutral_match = neutral_idx
        .iter()
        .zip(&neutral_out)
        .filter(|(&i, out)| {
            let s = model.vocab().decode(out);
            s == f_text[i] || s == i_text[i]
        })
        .count() as f64
        / neutral_idx.len().max(1) as f64;
    Ok(ToyEval {
        acc_formal,
        acc_informal,
        bleu_formal,
        bleu_informal,
        contrast_ter,
        marker_only,
        neutral_match,
        formal_outputs: formal,
        informal_outputs: informal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intervention::toylang::gen_toylang;

    fn corpus(n: usize) -> Vec<LabeledTriplet> {
        gen_toylang(n, 11).iter().flat_map(|p| p.triplets()).collect()
    }

    fn tiny() -> TrainConfig {
        TrainConfig {
            model: ModelConfig { d_model: 16, layers: 1, heads: 2, d_ff: 32 },
            batch_size: 8,
            epochs: 3,
            warmup_steps: 0,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn masking_rates() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for f in [FormalityLabel::Formal, FormalityLabel::Informal] {
            assert!((0..1000).all(|_| mask_style(f, 0.0, &mut rng) == f));
            assert!((0..1000).all(|_| mask_style(f, 1.0, &mut rng) == FormalityLabel::Neutral));
        }
        assert_eq!(mask_style(FormalityLabel::Neutral, 0.0, &mut rng), FormalityLabel::Neutral);
        let a: Vec<_> =
            (0..50).map(|_| mask_style(FormalityLabel::Formal, 0.5, &mut ChaCha8Rng::seed_from_u64(4))).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn zero_learning_rate_keeps_params() {
        let c = corpus(20);
        let cfg = TrainConfig { learning_rate: 0.0, epochs: 1, ..tiny() };
        let mut m = cfg.build_model(&[&c]).unwrap();
        let before = m.params().clone();
        let out = train(&mut m, &c, &cfg).unwrap();
        assert_eq!(out.epochs.len(), 1);
        assert_eq!(m.params(), &before);
    }

    #[test]
    fn deterministic_and_decreasing() {
        let c = corpus(40);
        let cfg = tiny();
        let mut a = cfg.build_model(&[&c]).unwrap();
        let mut b = cfg.build_model(&[&c]).unwrap();
        let ra = train(&mut a, &c, &cfg).unwrap();
        let rb = train(&mut b, &c, &cfg).unwrap();
        assert_eq!(ra, rb);
        assert_eq!(a.params(), b.params());
        assert!(ra.epochs.last().unwrap().loss < ra.epochs[0].loss);
    }

    #[test]
    fn neutral_vector_gets_updates() {
        let c = corpus(10);
        let cfg = TrainConfig { epochs: 1, mask_prob: 1.0, ..tiny() };
        let mut m = cfg.build_model(&[&c]).unwrap();
        let before: Vec<_> = Style::ALL.iter().map(|&s| m.style_vector(s)).collect();
        let out = train(&mut m, &c, &cfg).unwrap();
        assert_eq!(out.epochs[0].masked, c.len());
        let moved = |s: Style| (&m.style_vector(s) - &before[s.index()]).mapv(f64::abs).sum();
        assert!(moved(Style::Neutral) > 0.0);
        assert_eq!(moved(Style::Formal), 0.0);
        assert_eq!(moved(Style::Informal), 0.0);
    }

    #[test]
    fn two_pass_runs_second_stage() {
        let c = corpus(20);
        let gold = corpus(5);
        let second = SecondStage {
            epochs: 2,
            resample: 7,
            full_mask_langs: vec![crate::intervention::toy_lang()],
            ..SecondStage::default()
        };
        let cfg = TrainConfig { two_pass: Some(second), ..tiny() };
        let mut m = cfg.build_model(&[&c, &gold]).unwrap();
        let out = train_two_pass(&mut m, &c, &gold, &cfg).unwrap();
        assert_eq!(out.epochs.len(), 5);
        let last = out.epochs.last().unwrap();
        assert_eq!((last.stage, last.examples, last.masked), (2, 17, 17));
        assert_eq!(resample_mixture(&gold, &c, 1000, 0).len(), gold.len() + c.len());
    }

    #[test]
    fn rejects_bad_config() {
        let c = corpus(5);
        let mut m = tiny().build_model(&[&c]).unwrap();
        assert!(train(&mut m, &[], &tiny()).is_err());
        let cfg = TrainConfig { mask_prob: 1.5, ..tiny() };
        assert!(matches!(train(&mut m, &c, &cfg), Err(InterventionError::InvalidConfig(_))));
        let cfg = TrainConfig { model: ModelConfig::default(), ..tiny() };
        assert!(train(&mut m, &c, &cfg).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let c = corpus(5);
        let cfg = tiny();
        let mut m = cfg.build_model(&[&c]).unwrap();
        m.params_mut().values_mut()[0].fill(f64::NAN);
        assert!(matches!(train(&mut m, &c, &cfg), Err(InterventionError::TrainingDiverged { stage: 1, epoch: 1 })));
    }
}
