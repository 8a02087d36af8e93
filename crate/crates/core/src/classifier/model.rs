use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ClassifierError;
use crate::text::{FormalityLabel, Segment};

const FORMAT: &str = "fsmt-char-ngram-logreg";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub n_range: (usize, usize),
    pub hash_bits: u32,
    pub seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { n_range: (1, 4), hash_bits: 18, seed: 0, epochs: 300, learning_rate: 1.0 }
    }
}

/// Logistic regression over hashed character n-grams of the target text.
/// A positive score means formal.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearNGramModel {
    n_range: (usize, usize),
    hash_bits: u32,
    seed: u64,
    bias: f64,
    weights: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Training examples after neutral duplication.
    pub effective_size: usize,
    /// Mean logistic loss before each update, then after the last one.
    pub losses: Vec<f64>,
}

fn fnv1a(seed: u64, n: usize, gram: &[char]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    let mut eat = |b: u8| {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x100000001b3);
    };
    seed.to_le_bytes().into_iter().for_each(&mut eat);
    eat(n as u8);
    let mut buf = [0u8; 4];
    for c in gram {
        c.encode_utf8(&mut buf).bytes().for_each(&mut eat);
    }
    h
}

/// L2-normalized hashed n-gram counts, sorted by index.
pub fn features(text: &str, n_range: (usize, usize), hash_bits: u32, seed: u64) -> Vec<(u32, f64)> {
    let chars: Vec<char> = std::iter::once(' ').chain(text.chars()).chain(std::iter::once(' ')).collect();
    let mask = (1u64 << hash_bits) - 1;
    let mut counts: BTreeMap<u32, f64> = BTreeMap::new();
    for n in n_range.0..=n_range.1 {
        for gram in chars.windows(n) {
            *counts.entry((fnv1a(seed, n, gram) & mask) as u32).or_insert(0.0) += 1.0;
        }
    }
    let norm = counts.values().map(|c| c * c).sum::<f64>().sqrt();
    counts.into_iter().map(|(i, c)| (i, c / norm)).collect()
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^x) without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl LinearNGramModel {
    /// A model with all weights zero; predicts 0.5 everywhere.
    pub fn zeros(n_range: (usize, usize), hash_bits: u32, seed: u64) -> Result<Self, ClassifierError> {
        if n_range.0 == 0 || n_range.0 > n_range.1 || n_range.1 > 255 {
            return Err(ClassifierError::InvalidModel(format!("bad n-gram range {n_range:?}")));
        }
        if !(1..=28).contains(&hash_bits) {
            return Err(ClassifierError::InvalidModel(format!("hash_bits {hash_bits} outside 1..=28")));
        }
        Ok(LinearNGramModel { n_range, hash_bits, seed, bias: 0.0, weights: vec![0.0; 1 << hash_bits] })
    }

    pub fn n_range(&self) -> (usize, usize) {
        self.n_range
    }

    pub fn hash_bits(&self) -> u32 {
        self.hash_bits
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn features(&self, text: &str) -> Vec<(u32, f64)> {
        features(text, self.n_range, self.hash_bits, self.seed)
    }

    fn score_features(&self, x: &[(u32, f64)]) -> f64 {
        self.bias + x.iter().map(|&(i, v)| self.weights[i as usize] * v).sum::<f64>()
    }

    /// Raw linear score; positive means formal.
    pub fn decision(&self, text: &str) -> f64 {
        self.score_features(&self.features(text))
    }

    pub fn predict_proba(&self, segment: &Segment) -> f64 {
        sigmoid(self.decision(segment.text()))
    }

    pub fn to_json(&self) -> String {
        let weights: BTreeMap<u32, f64> =
            self.weights.iter().enumerate().filter(|(_, w)| **w != 0.0).map(|(i, w)| (i as u32, *w)).collect();
        let f = ModelFile {
            format: FORMAT.into(),
            version: VERSION,
            n_range: self.n_range,
            hash_bits: self.hash_bits,
            seed: self.seed,
            bias: self.bias,
            weights,
        };
        serde_json::to_string(&f).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, ClassifierError> {
        let f: ModelFile = serde_json::from_str(s).map_err(|e| ClassifierError::InvalidModel(e.to_string()))?;
        if f.format != FORMAT || f.version != VERSION {
            return Err(ClassifierError::InvalidModel(format!("unsupported model format {} v{}", f.format, f.version)));
        }
        let mut m = LinearNGramModel::zeros(f.n_range, f.hash_bits, f.seed)?;
        if !f.bias.is_finite() {
            return Err(ClassifierError::InvalidModel("bias is not finite".into()));
        }
        m.bias = f.bias;
        for (i, w) in f.weights {
            let slot = m
                .weights
                .get_mut(i as usize)
                .ok_or_else(|| ClassifierError::InvalidModel(format!("weight index {i} out of range")))?;
            if !w.is_finite() {
                return Err(ClassifierError::InvalidModel(format!("weight {i} is not finite")));
            }
            *slot = w;
        }
        Ok(m)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    n_range: (usize, usize),
    hash_bits: u32,
    seed: u64,
    bias: f64,
    weights: BTreeMap<u32, f64>,
}

/// Fits the classifier by full-batch gradient descent on the mean logistic
/// loss. `Neutral` examples enter once as formal and once as informal.
pub fn train_classifier(
    examples: &[(Segment, FormalityLabel)],
    config: &TrainConfig,
) -> Result<(LinearNGramModel, TrainReport), ClassifierError> {
    let mut model = LinearNGramModel::zeros(config.n_range, config.hash_bits, config.seed)?;
    let mut data: Vec<(Vec<(u32, f64)>, f64)> = Vec::new();
    let (mut formal, mut informal) = (false, false);
    for (seg, label) in examples {
        let x = model.features(seg.text());
        match label {
            FormalityLabel::Formal => {
                formal = true;
                data.push((x, 1.0));
            }
            FormalityLabel::Informal => {
                informal = true;
                data.push((x, 0.0));
            }
            FormalityLabel::Neutral => {
                data.push((x.clone(), 1.0));
                data.push((x, 0.0));
            }
            other => return Err(ClassifierError::UntrainableLabel(*other)),
        }
    }
    if !(formal && informal) {
        return Err(ClassifierError::DegenerateData);
    }
    let n = data.len() as f64;
    let mut losses = Vec::with_capacity(config.epochs + 1);
    let mut grad = vec![0.0; model.weights.len()];
    let mut touched: Vec<u32> = data.iter().flat_map(|(x, _)| x.iter().map(|&(i, _)| i)).collect();
    touched.sort_unstable();
    touched.dedup();
    for epoch in 0..=config.epochs {
        let mut loss = 0.0;
        let mut gb = 0.0;
        for (x, y) in &data {
            let s = model.score_features(x);
            // -[y log p + (1-y) log(1-p)] with p = sigmoid(s)
            loss += softplus(s) - y * s;
            let r = sigmoid(s) - y;
            gb += r;
            for &(i, v) in x {
                grad[i as usize] += r * v;
            }
        }
        losses.push(loss / n);
        if epoch == config.epochs {
            break;
        }
        let step = config.learning_rate / n;
        model.bias -= step * gb;
        for &i in &touched {
            model.weights[i as usize] -= step * grad[i as usize];
            grad[i as usize] = 0.0;
        }
    }
    Ok((model, TrainReport { effective_size: data.len(), losses }))
}
