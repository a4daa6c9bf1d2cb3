//! Binary checkpoint container.
//!
//! ```text
//! "STPOTRCK"  u32 version  u32 len  <config JSON>  u32 count
//! count x ( u32 len <name utf-8>  u32 rank  rank x u64 dim  numel x f64 )
//! ```
//!
//! All integers and floats are little-endian.

use std::path::Path;

use stpotr_tensor::Tensor;

use super::config::ModelConfig;
use super::stpotr::StpotrModel;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"STPOTRCK";
const VERSION: u32 = 1;

pub fn write_checkpoint(model: &StpotrModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let config = serde_json::to_vec(model.config()).expect("config serializes");
    out.extend_from_slice(&(config.len() as u32).to_le_bytes());
    out.extend_from_slice(&config);
    let params = model.params();
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (_, p) in params.iter() {
        out.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
        out.extend_from_slice(p.name.as_bytes());
        out.extend_from_slice(&(p.value.rank() as u32).to_le_bytes());
        for &d in p.value.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in p.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Checkpoint(format!("truncated at byte {}", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Rebuilds a model from checkpoint bytes.
pub fn read_checkpoint(bytes: &[u8]) -> Result<StpotrModel> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let len = r.u32()? as usize;
    let config: ModelConfig = serde_json::from_slice(r.take(len)?)?;
    let mut model = StpotrModel::new(config, 0)?;
    let count = r.u32()? as usize;
    if count != model.params().len() {
        return Err(Error::Checkpoint(format!(
            "expected {} tensors for this config, found {count}",
            model.params().len()
        )));
    }
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::Checkpoint("tensor name is not utf-8".into()))?
            .to_string();
        let rank = r.u32()? as usize;
        let shape = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let id = model
            .params()
            .find(&name)
            .ok_or_else(|| Error::Checkpoint(format!("unexpected tensor {name}")))?;
        let slot = &mut model.params_mut().get_mut(id).value;
        if slot.shape() != shape.as_slice() {
            return Err(Error::Checkpoint(format!(
                "tensor {name}: shape {shape:?}, model expects {:?}",
                slot.shape()
            )));
        }
        let raw = r.take(slot.numel().checked_mul(8).ok_or_else(|| Error::Checkpoint("oversized tensor".into()))?)?;
        for (v, b) in slot.data_mut().iter_mut().zip(raw.chunks_exact(8)) {
            *v = f64::from_le_bytes(b.try_into().unwrap());
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(model)
}

pub fn save_checkpoint(path: &Path, model: &StpotrModel) -> Result<()> {
    std::fs::write(path, write_checkpoint(model)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<StpotrModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&bytes)
}

/// Loads a checkpoint and rejects it unless its config equals `expected`.
pub fn load_checkpoint_expecting(path: &Path, expected: &ModelConfig) -> Result<StpotrModel> {
    let model = load_checkpoint(path)?;
    let fields = model.config().diff(expected);
    if fields.is_empty() {
        Ok(model)
    } else {
        Err(Error::ConfigMismatch { fields })
    }
}

/// Copies every parameter value into a fresh tensor list (name order).
pub fn snapshot(model: &StpotrModel) -> Vec<(String, Tensor)> {
    model.params().iter().map(|(_, p)| (p.name.clone(), p.value.clone())).collect()
}
