//! Binary checkpoints: magic, format version, a JSON header with the model
//! shape, vocabulary and parameter names, then all weights as little-endian
//! `f64` in header order.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::model::{ModelConfig, ToyInterventionModel};
use super::tape::Mat;
use super::vocab::Vocab;
use super::InterventionError;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"FSMTTOY1";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    vocab: Vocab,
    params: Vec<(String, usize, usize)>,
}

pub fn save_checkpoint<W: Write>(model: &ToyInterventionModel, mut w: W) -> Result<(), InterventionError> {
    let ps = model.params();
    let header = Header {
        config: model.config().clone(),
        vocab: model.vocab().clone(),
        params: ps.names().iter().zip(ps.values()).map(|(n, v)| (n.clone(), v.nrows(), v.ncols())).collect(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| InterventionError::Checkpoint(e.to_string()))?;
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    for v in ps.values() {
        for x in v.iter() {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint<R: Read>(mut r: R) -> Result<ToyInterventionModel, InterventionError> {
    let bad = |m: &str| InterventionError::Checkpoint(m.to_owned());
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(bad("not a toy model checkpoint"));
    }
    let mut u32b = [0u8; 4];
    r.read_exact(&mut u32b)?;
    let version = u32::from_le_bytes(u32b);
    if version != CHECKPOINT_VERSION {
        return Err(InterventionError::Checkpoint(format!("unsupported version {version}")));
    }
    let mut u64b = [0u8; 8];
    r.read_exact(&mut u64b)?;
    let len = usize::try_from(u64::from_le_bytes(u64b)).map_err(|_| bad("header too large"))?;
    let mut json = Vec::new();
    (&mut r).take(len as u64).read_to_end(&mut json)?;
    if json.len() != len {
        return Err(bad("truncated header"));
    }
    let header: Header = serde_json::from_slice(&json).map_err(|e| InterventionError::Checkpoint(e.to_string()))?;
    let mut values = Vec::with_capacity(header.params.len());
    let mut f64b = [0u8; 8];
    for (name, rows, cols) in header.params {
        let mut m = Mat::zeros((rows, cols));
        for x in m.iter_mut() {
            r.read_exact(&mut f64b)?;
            *x = f64::from_le_bytes(f64b);
        }
        values.push((name, m));
    }
    if r.read(&mut [0u8; 1])? != 0 {
        return Err(bad("trailing bytes"));
    }
    ToyInterventionModel::from_parts(header.config, header.vocab, values)
}
