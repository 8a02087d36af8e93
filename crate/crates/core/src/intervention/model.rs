//! Pre-norm transformer encoder-decoder whose decoder attends to the encoder
//! output plus one learned style vector per formality level.

use ndarray::{s, Array1};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::tape::{Mat, ParamStore, Seg, Tape, Var};
use super::vocab::{Vocab, BOS, EOS};
use super::InterventionError;
use crate::text::{FormalityLabel, LabeledTriplet, Lang};

/// Row index into the style table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Style {
    Formal = 0,
    Informal = 1,
    Neutral = 2,
}

impl Style {
    pub const ALL: [Style; 3] = [Style::Formal, Style::Informal, Style::Neutral];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl TryFrom<FormalityLabel> for Style {
    type Error = InterventionError;
    fn try_from(l: FormalityLabel) -> Result<Self, Self::Error> {
        match l {
            FormalityLabel::Formal => Ok(Style::Formal),
            FormalityLabel::Informal => Ok(Style::Informal),
            FormalityLabel::Neutral => Ok(Style::Neutral),
            other => Err(InterventionError::UnknownLevel(other)),
        }
    }
}

impl From<Style> for FormalityLabel {
    fn from(s: Style) -> Self {
        match s {
            Style::Formal => FormalityLabel::Formal,
            Style::Informal => FormalityLabel::Informal,
            Style::Neutral => FormalityLabel::Neutral,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub d_model: usize,
    pub layers: usize,
    pub heads: usize,
    pub d_ff: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { d_model: 64, layers: 2, heads: 4, d_ff: 128 }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), InterventionError> {
        if self.d_model == 0 || self.heads == 0 || self.d_ff == 0 || self.layers == 0 {
            return Err(InterventionError::InvalidConfig("model sizes must be positive".into()));
        }
        if !self.d_model.is_multiple_of(self.heads) {
            return Err(InterventionError::InvalidConfig(format!(
                "d_model {} is not divisible by heads {}",
                self.d_model, self.heads
            )));
        }
        Ok(())
    }
}

/// One teacher-forced training unit in vocabulary ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Example {
    pub src: Vec<usize>,
    pub tgt: Vec<usize>,
    pub style: Style,
}

/// Output of [`ToyInterventionModel::forward`].
#[derive(Clone, Debug)]
pub struct Forward {
    /// Encoder output, `(source len, d)`.
    pub z: Mat,
    /// The style vector added to every row of `z`.
    pub v: Array1<f64>,
    /// Next-token distributions, one row per decoder position.
    pub probs: Mat,
}

#[derive(Clone, Copy, Debug)]
struct Attn {
    wq: usize,
    bq: usize,
    wk: usize,
    bk: usize,
    wv: usize,
    bv: usize,
    wo: usize,
    bo: usize,
}

#[derive(Clone, Copy, Debug)]
struct Norm {
    g: usize,
    b: usize,
}

#[derive(Clone, Copy, Debug)]
struct Ffn {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

#[derive(Clone, Debug)]
struct EncLayer {
    ln1: Norm,
    attn: Attn,
    ln2: Norm,
    ffn: Ffn,
}

#[derive(Clone, Debug)]
struct DecLayer {
    ln1: Norm,
    self_attn: Attn,
    ln2: Norm,
    cross: Attn,
    ln3: Norm,
    ffn: Ffn,
}

#[derive(Clone, Debug)]
struct Layout {
    tok_emb: usize,
    style: usize,
    enc: Vec<EncLayer>,
    enc_ln: Norm,
    dec: Vec<DecLayer>,
    dec_ln: Norm,
    out_w: usize,
    out_b: usize,
}

enum Init {
    Normal(f64),
    Zeros,
    Ones,
}

struct Builder {
    ps: ParamStore,
    rng: Option<ChaCha8Rng>,
    d: usize,
}

impl Builder {
    fn mat(&mut self, name: String, rows: usize, cols: usize, init: Init) -> usize {
        let m = match (init, &mut self.rng) {
            (Init::Ones, _) => Mat::ones((rows, cols)),
            (Init::Normal(std), Some(rng)) => {
                let n = Normal::new(0.0, std).expect("positive std");
                Mat::from_shape_simple_fn((rows, cols), || n.sample(rng))
            }
            _ => Mat::zeros((rows, cols)),
        };
        self.ps.push(name, m)
    }

    fn norm(&mut self, name: &str) -> Norm {
        let d = self.d;
        Norm { g: self.mat(format!("{name}.g"), 1, d, Init::Ones), b: self.mat(format!("{name}.b"), 1, d, Init::Zeros) }
    }

    fn attn(&mut self, name: &str, out_std: f64) -> Attn {
        let d = self.d;
        let std = 1.0 / (d as f64).sqrt();
        Attn {
            wq: self.mat(format!("{name}.wq"), d, d, Init::Normal(std)),
            bq: self.mat(format!("{name}.bq"), 1, d, Init::Zeros),
            wk: self.mat(format!("{name}.wk"), d, d, Init::Normal(std)),
            bk: self.mat(format!("{name}.bk"), 1, d, Init::Zeros),
            wv: self.mat(format!("{name}.wv"), d, d, Init::Normal(std)),
            bv: self.mat(format!("{name}.bv"), 1, d, Init::Zeros),
            wo: self.mat(format!("{name}.wo"), d, d, Init::Normal(out_std)),
            bo: self.mat(format!("{name}.bo"), 1, d, Init::Zeros),
        }
    }

    fn ffn(&mut self, name: &str, d_ff: usize, out_scale: f64) -> Ffn {
        let d = self.d;
        Ffn {
            w1: self.mat(format!("{name}.w1"), d, d_ff, Init::Normal(1.0 / (d as f64).sqrt())),
            b1: self.mat(format!("{name}.b1"), 1, d_ff, Init::Zeros),
            w2: self.mat(format!("{name}.w2"), d_ff, d, Init::Normal(out_scale / (d_ff as f64).sqrt())),
            b2: self.mat(format!("{name}.b2"), 1, d, Init::Zeros),
        }
    }
}

/// Parameters in a fixed order. Without an rng every weight is zero except
/// layer-norm gains.
fn build(cfg: &ModelConfig, vocab: usize, rng: Option<ChaCha8Rng>) -> (ParamStore, Layout) {
    let d = cfg.d_model;
    let mut b = Builder { ps: ParamStore::default(), rng, d };
    let resid = 1.0 / (2.0 * cfg.layers as f64).sqrt();
    let std = 1.0 / (d as f64).sqrt();
    let tok_emb = b.mat("tok_emb".into(), vocab, d, Init::Normal(std));
    let style = b.mat("style".into(), 3, d, Init::Normal(0.1));
    let enc = (0..cfg.layers)
        .map(|l| EncLayer {
            ln1: b.norm(&format!("enc.{l}.ln1")),
            attn: b.attn(&format!("enc.{l}.attn"), std * resid),
            ln2: b.norm(&format!("enc.{l}.ln2")),
            ffn: b.ffn(&format!("enc.{l}.ffn"), cfg.d_ff, resid),
        })
        .collect();
    let enc_ln = b.norm("enc.ln");
    let dec = (0..cfg.layers)
        .map(|l| DecLayer {
            ln1: b.norm(&format!("dec.{l}.ln1")),
            self_attn: b.attn(&format!("dec.{l}.self"), std * resid),
            ln2: b.norm(&format!("dec.{l}.ln2")),
            cross: b.attn(&format!("dec.{l}.cross"), std * resid),
            ln3: b.norm(&format!("dec.{l}.ln3")),
            ffn: b.ffn(&format!("dec.{l}.ffn"), cfg.d_ff, resid),
        })
        .collect();
    let dec_ln = b.norm("dec.ln");
    let out_w = b.mat("out.w".into(), d, vocab, Init::Normal(std));
    let out_b = b.mat("out.b".into(), 1, vocab, Init::Zeros);
    (b.ps, Layout { tok_emb, style, enc, enc_ln, dec, dec_ln, out_w, out_b })
}

fn positions(lens: &[usize], d: usize) -> Mat {
    let mut m = Mat::zeros((lens.iter().sum(), d));
    let mut row = 0;
    for &len in lens {
        for pos in 0..len {
            for i in 0..d / 2 {
                let angle = pos as f64 / 10_000f64.powf(2.0 * i as f64 / d as f64);
                m[[row, 2 * i]] = angle.sin();
                m[[row, 2 * i + 1]] = angle.cos();
            }
            row += 1;
        }
    }
    m
}

fn segments(lens: &[usize]) -> Vec<Seg> {
    let mut start = 0;
    lens.iter()
        .map(|&len| {
            let s = Seg { start, len };
            start += len;
            s
        })
        .collect()
}

fn argmax(row: ndarray::ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (i, &x) in row.iter().enumerate() {
        if x > row[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Debug)]
pub struct ToyInterventionModel {
    config: ModelConfig,
    vocab: Vocab,
    params: ParamStore,
    layout: Layout,
}

impl ToyInterventionModel {
    pub fn new(config: ModelConfig, vocab: Vocab, seed: u64) -> Result<Self, InterventionError> {
        config.validate()?;
        let (params, layout) = build(&config, vocab.len(), Some(ChaCha8Rng::seed_from_u64(seed)));
        Ok(ToyInterventionModel { config, vocab, params, layout })
    }

    /// Rebuilds a model from named parameter values, as stored in a
    /// checkpoint. Names and shapes must match the layout exactly.
    pub fn from_parts(
        config: ModelConfig,
        vocab: Vocab,
        values: Vec<(String, Mat)>,
    ) -> Result<Self, InterventionError> {
        config.validate()?;
        let (mut params, layout) = build(&config, vocab.len(), None);
        if values.len() != params.len() {
            return Err(InterventionError::Checkpoint(format!(
                "expected {} parameters, found {}",
                params.len(),
                values.len()
            )));
        }
        for (i, (name, value)) in values.into_iter().enumerate() {
            if params.names()[i] != name || params.get(i).dim() != value.dim() {
                return Err(InterventionError::Checkpoint(format!("parameter {i} ({name}) does not match the layout")));
            }
            params.values_mut()[i] = value;
        }
        if !params.all_finite() {
            return Err(InterventionError::Checkpoint("non-finite parameter".into()));
        }
        Ok(ToyInterventionModel { config, vocab, params, layout })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// The learned vector `V = Emb(f)`.
    pub fn style_vector(&self, style: Style) -> Array1<f64> {
        self.params.get(self.layout.style).row(style.index()).to_owned()
    }

    /// Encodes a triplet: source ids get the target-language tag prefix.
    pub fn example(&self, t: &LabeledTriplet) -> Result<Example, InterventionError> {
        let src = self.vocab.encode_source(t.source.text(), t.target.lang());
        let tgt = self.vocab.encode(t.target.text());
        Ok(Example { src, tgt, style: Style::try_from(t.label)? })
    }

    pub fn encode_source(&self, text: &str, target_lang: &Lang) -> Vec<usize> {
        self.vocab.encode_source(text, target_lang)
    }

    fn ln(&self, t: &mut Tape, x: Var, n: Norm) -> Var {
        let (g, b) = (t.param(n.g), t.param(n.b));
        t.layer_norm(x, g, b)
    }

    fn lin(&self, t: &mut Tape, x: Var, w: usize, b: usize) -> Var {
        let (w, b) = (t.param(w), t.param(b));
        t.linear(x, w, b)
    }

    fn attn(&self, t: &mut Tape, x: Var, kv: Var, a: &Attn, pairs: Vec<(Seg, Seg)>, causal: bool) -> Var {
        let q = self.lin(t, x, a.wq, a.bq);
        let k = self.lin(t, kv, a.wk, a.bk);
        let v = self.lin(t, kv, a.wv, a.bv);
        let o = t.attention(q, k, v, self.config.heads, pairs, causal);
        self.lin(t, o, a.wo, a.bo)
    }

    fn ffn(&self, t: &mut Tape, x: Var, f: &Ffn) -> Var {
        let h = self.lin(t, x, f.w1, f.b1);
        let h = t.gelu(h);
        self.lin(t, h, f.w2, f.b2)
    }

    fn embed(&self, t: &mut Tape, seqs: &[&[usize]]) -> (Var, Vec<Seg>) {
        let lens: Vec<usize> = seqs.iter().map(|s| s.len()).collect();
        let ids: Vec<usize> = seqs.iter().flat_map(|s| s.iter().copied()).collect();
        let table = t.param(self.layout.tok_emb);
        let e = t.gather(table, ids);
        let e = t.scale(e, (self.config.d_model as f64).sqrt());
        let pos = t.constant(positions(&lens, self.config.d_model));
        (t.add(e, pos), segments(&lens))
    }

    /// `Z = E(x)` for stacked sources.
    fn encoder(&self, t: &mut Tape, srcs: &[&[usize]]) -> (Var, Vec<Seg>) {
        let (mut x, segs) = self.embed(t, srcs);
        let pairs: Vec<(Seg, Seg)> = segs.iter().map(|&s| (s, s)).collect();
        for l in &self.layout.enc {
            let h = self.ln(t, x, l.ln1);
            let h = self.attn(t, h, h, &l.attn, pairs.clone(), false);
            x = t.add(x, h);
            let h = self.ln(t, x, l.ln2);
            let h = self.ffn(t, h, &l.ffn);
            x = t.add(x, h);
        }
        (self.ln(t, x, self.layout.enc_ln), segs)
    }

    /// `Z + V`, with each sequence's style vector added to all its rows.
    fn intervene(&self, t: &mut Tape, z: Var, segs: &[Seg], styles: &[Style]) -> Var {
        let idx: Vec<usize> =
            segs.iter().zip(styles).flat_map(|(s, st)| std::iter::repeat_n(st.index(), s.len)).collect();
        let table = t.param(self.layout.style);
        let v = t.gather(table, idx);
        t.add(z, v)
    }

    /// Logits for stacked decoder inputs attending to `memory`.
    fn decoder(&self, t: &mut Tape, memory: Var, src_segs: &[Seg], inputs: &[&[usize]]) -> (Var, Vec<Seg>) {
        let (mut x, segs) = self.embed(t, inputs);
        let self_pairs: Vec<(Seg, Seg)> = segs.iter().map(|&s| (s, s)).collect();
        let cross_pairs: Vec<(Seg, Seg)> = segs.iter().copied().zip(src_segs.iter().copied()).collect();
        for l in &self.layout.dec {
            let h = self.ln(t, x, l.ln1);
            let h = self.attn(t, h, h, &l.self_attn, self_pairs.clone(), true);
            x = t.add(x, h);
            let h = self.ln(t, x, l.ln2);
            let h = self.attn(t, h, memory, &l.cross, cross_pairs.clone(), false);
            x = t.add(x, h);
            let h = self.ln(t, x, l.ln3);
            let h = self.ffn(t, h, &l.ffn);
            x = t.add(x, h);
        }
        let h = self.ln(t, x, self.layout.dec_ln);
        (self.lin(t, h, self.layout.out_w, self.layout.out_b), segs)
    }

    fn check_src(src: &[usize]) -> Result<(), InterventionError> {
        if src.is_empty() {
            return Err(InterventionError::EmptyInput);
        }
        Ok(())
    }

    /// Encoder outputs for each source, computed without any style input.
    pub fn encode(&self, srcs: &[Vec<usize>]) -> Result<Vec<Mat>, InterventionError> {
        srcs.iter().try_for_each(|s| Self::check_src(s))?;
        let mut t = Tape::new(&self.params);
        let refs: Vec<&[usize]> = srcs.iter().map(Vec::as_slice).collect();
        let (z, segs) = self.encoder(&mut t, &refs);
        let zv = t.value(z);
        Ok(segs.iter().map(|s| zv.slice(s![s.start..s.start + s.len, ..]).to_owned()).collect())
    }

    /// Teacher-forced next-token distributions after `[BOS] + prefix`.
    pub fn forward(&self, src: &[usize], f: FormalityLabel, prefix: &[usize]) -> Result<Forward, InterventionError> {
        let style = Style::try_from(f)?;
        Self::check_src(src)?;
        let mut t = Tape::new(&self.params);
        let (z, segs) = self.encoder(&mut t, &[src]);
        let m = self.intervene(&mut t, z, &segs, &[style]);
        let input: Vec<usize> = std::iter::once(BOS).chain(prefix.iter().copied()).collect();
        let (logits, _) = self.decoder(&mut t, m, &segs, &[&input]);
        let mut probs = t.value(logits).to_owned();
        for mut row in probs.rows_mut() {
            let mx = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            row.mapv_inplace(|x| (x - mx).exp());
            let s = row.sum();
            row /= s;
        }
        Ok(Forward { z: t.value(z).to_owned(), v: self.style_vector(style), probs })
    }

    /// Builds the loss graph: summed token NLL scaled by `1 / tokens`.
    fn loss_graph<'a>(&'a self, batch: &[Example]) -> Result<(Tape<'a>, Var, usize), InterventionError> {
        if batch.is_empty() {
            return Err(InterventionError::EmptyInput);
        }
        batch.iter().try_for_each(|e| Self::check_src(&e.src))?;
        let mut t = Tape::new(&self.params);
        let srcs: Vec<&[usize]> = batch.iter().map(|e| e.src.as_slice()).collect();
        let styles: Vec<Style> = batch.iter().map(|e| e.style).collect();
        let inputs: Vec<Vec<usize>> =
            batch.iter().map(|e| std::iter::once(BOS).chain(e.tgt.iter().copied()).collect()).collect();
        let targets: Vec<usize> =
            batch.iter().flat_map(|e| e.tgt.iter().copied().chain(std::iter::once(EOS))).collect();
        let (z, segs) = self.encoder(&mut t, &srcs);
        let m = self.intervene(&mut t, z, &segs, &styles);
        let input_refs: Vec<&[usize]> = inputs.iter().map(Vec::as_slice).collect();
        let (logits, _) = self.decoder(&mut t, m, &segs, &input_refs);
        let tokens = targets.len();
        let nll = t.cross_entropy(logits, targets);
        let loss = t.scale(nll, 1.0 / tokens as f64);
        Ok((t, loss, tokens))
    }

    /// Token-weighted mean negative log-likelihood under teacher forcing.
    pub fn nll_loss(&self, batch: &[Example]) -> Result<f64, InterventionError> {
        let (t, loss, _) = self.loss_graph(batch)?;
        Ok(t.scalar(loss))
    }

    /// Loss, parameter gradients and the number of target tokens.
    pub fn loss_and_grads(&self, batch: &[Example]) -> Result<(f64, Vec<Mat>, usize), InterventionError> {
        let (t, loss, tokens) = self.loss_graph(batch)?;
        let grads = t.backward(loss);
        Ok((t.scalar(loss), grads, tokens))
    }

    /// Greedy decoding; stops at the end token or after `max_len` tokens.
    pub fn decode(&self, src: &[usize], f: FormalityLabel, max_len: usize) -> Result<Vec<usize>, InterventionError> {
        let style = Style::try_from(f)?;
        Ok(self.decode_batch(&[(src.to_vec(), style)], max_len)?.remove(0))
    }

    pub fn decode_batch(
        &self,
        items: &[(Vec<usize>, Style)],
        max_len: usize,
    ) -> Result<Vec<Vec<usize>>, InterventionError> {
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); items.len()];
        if items.is_empty() || max_len == 0 {
            return Ok(out);
        }
        items.iter().try_for_each(|(s, _)| Self::check_src(s))?;
        let (memory, src_segs) = {
            let mut t = Tape::new(&self.params);
            let srcs: Vec<&[usize]> = items.iter().map(|(s, _)| s.as_slice()).collect();
            let styles: Vec<Style> = items.iter().map(|(_, st)| *st).collect();
            let (z, segs) = self.encoder(&mut t, &srcs);
            let m = self.intervene(&mut t, z, &segs, &styles);
            (t.value(m).to_owned(), segs)
        };
        let mut active: Vec<usize> = (0..items.len()).collect();
        for _ in 0..max_len {
            if active.is_empty() {
                break;
            }
            let mut t = Tape::new(&self.params);
            let m = t.constant(memory.clone());
            let inputs: Vec<Vec<usize>> =
                active.iter().map(|&i| std::iter::once(BOS).chain(out[i].iter().copied()).collect()).collect();
            let refs: Vec<&[usize]> = inputs.iter().map(Vec::as_slice).collect();
            let segs: Vec<Seg> = active.iter().map(|&i| src_segs[i]).collect();
            let (logits, dsegs) = self.decoder(&mut t, m, &segs, &refs);
            let lv = t.value(logits);
            let mut still = Vec::with_capacity(active.len());
            for (&i, s) in active.iter().zip(&dsegs) {
                let next = argmax(lv.row(s.start + s.len - 1));
                if next != EOS {
                    out[i].push(next);
                    still.push(i);
                }
            }
            active = still;
        }
        Ok(out)
    }

    /// Decodes `source` into `target_lang` text at the requested level.
    pub fn translate(
        &self,
        source: &str,
        target_lang: &Lang,
        f: FormalityLabel,
        max_len: usize,
    ) -> Result<String, InterventionError> {
        let ids = self.decode(&self.encode_source(source, target_lang), f, max_len)?;
        Ok(self.vocab.decode(&ids))
    }
}
