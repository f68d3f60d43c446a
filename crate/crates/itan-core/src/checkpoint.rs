//! Versioned binary checkpoints: named parameter tensors plus training
//! state (episode counter, RNG state, and an opaque config JSON string).
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic "ITAN" | version u16 | precision u8 | reserved u8
//! episode u64 | rng_state u64 x4
//! config_len u32 | config JSON bytes
//! n_tensors u32
//! per tensor: name_len u32 | name bytes | trainable u8
//!             ndim u32 | dims u32 x ndim | payload (len * width bytes)
//! ```

use crate::data::ByteReader;
use crate::error::{Error, Result};
use crate::tape::ParamSet;
use crate::tensor::{Precision, Real};
use std::path::Path;

pub const CKPT_MAGIC: [u8; 4] = *b"ITAN";
pub const CKPT_VERSION: u16 = 1;

/// One named tensor as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorRecord {
    pub name: String,
    pub trainable: bool,
    pub shape: Vec<usize>,
    /// Values widened to f64 (exact for both stored precisions).
    pub data: Vec<f64>,
}

/// A decoded checkpoint. Round trips bitwise: `decode(encode(c)) == c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub precision: Precision,
    pub episode: u64,
    pub rng_state: [u64; 4],
    pub config_json: String,
    pub tensors: Vec<TensorRecord>,
}

impl Checkpoint {
    /// Snapshots a parameter set plus training state.
    pub fn from_params<R: Real>(
        set: &ParamSet<R>,
        config_json: impl Into<String>,
        episode: u64,
        rng_state: [u64; 4],
    ) -> Self {
        let tensors = set
            .ids()
            .map(|id| {
                let p = set.get(id);
                TensorRecord {
                    name: p.name.clone(),
                    trainable: p.trainable,
                    shape: p.value.shape().to_vec(),
                    data: p.value.data().iter().map(|v| v.to_f64()).collect(),
                }
            })
            .collect();
        Checkpoint {
            precision: R::PRECISION,
            episode,
            rng_state,
            config_json: config_json.into(),
            tensors,
        }
    }

    /// Restores parameter values into a structurally matching set (same
    /// names, shapes, and scalar precision as at save time).
    pub fn apply_to<R: Real>(&self, set: &mut ParamSet<R>) -> Result<()> {
        if R::PRECISION != self.precision {
            return Err(Error::Checkpoint(format!(
                "checkpoint stores {:?} scalars but the runtime uses {:?}",
                self.precision,
                R::PRECISION
            )));
        }
        let live = set.ids().count();
        if live != self.tensors.len() {
            return Err(Error::Checkpoint(format!(
                "checkpoint has {} tensors, model has {live} parameters",
                self.tensors.len()
            )));
        }
        for t in &self.tensors {
            let id = set.find(&t.name).ok_or_else(|| {
                Error::Checkpoint(format!("checkpoint tensor {:?} not in model", t.name))
            })?;
            let p = set.get_mut(id);
            if p.value.shape() != t.shape.as_slice() {
                return Err(Error::Checkpoint(format!(
                    "tensor {:?}: checkpoint shape {:?} vs model shape {:?}",
                    t.name,
                    t.shape,
                    p.value.shape()
                )));
            }
            for (w, &v) in p.value.data_mut().iter_mut().zip(&t.data) {
                *w = R::from_f64(v);
            }
        }
        Ok(())
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&CKPT_MAGIC);
        out.extend_from_slice(&CKPT_VERSION.to_le_bytes());
        out.push(self.precision.flag());
        out.push(0); // reserved
        out.extend_from_slice(&self.episode.to_le_bytes());
        for s in self.rng_state {
            out.extend_from_slice(&s.to_le_bytes());
        }
        out.extend_from_slice(&(self.config_json.len() as u32).to_le_bytes());
        out.extend_from_slice(self.config_json.as_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for t in &self.tensors {
            out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
            out.extend_from_slice(t.name.as_bytes());
            out.push(t.trainable as u8);
            out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
            for &d in &t.shape {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for &v in &t.data {
                match self.precision {
                    Precision::F32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
                    Precision::F64 => out.extend_from_slice(&v.to_le_bytes()),
                }
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        let magic: [u8; 4] = r.take(4)?.try_into().unwrap();
        if magic != CKPT_MAGIC {
            return Err(Error::BadMagic {
                found: magic,
                expected: CKPT_MAGIC,
            });
        }
        let version = r.u16()?;
        if version != CKPT_VERSION {
            return Err(Error::BadVersion {
                found: version,
                expected: CKPT_VERSION,
            });
        }
        let precision = Precision::from_flag(r.u8()?)?;
        r.u8()?; // reserved
        let episode = r.u64()?;
        let mut rng_state = [0u64; 4];
        for s in &mut rng_state {
            *s = r.u64()?;
        }
        let config_len = r.u32()? as usize;
        let config_json = String::from_utf8(r.take(config_len)?.to_vec())
            .map_err(|e| Error::Checkpoint(format!("config is not UTF-8: {e}")))?;
        let n_tensors = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(n_tensors);
        for _ in 0..n_tensors {
            let name_len = r.u32()? as usize;
            let name = String::from_utf8(r.take(name_len)?.to_vec())
                .map_err(|e| Error::Checkpoint(format!("tensor name is not UTF-8: {e}")))?;
            let trainable = r.u8()? != 0;
            let ndim = r.u32()? as usize;
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                shape.push(r.u32()? as usize);
            }
            let len: usize = shape.iter().product();
            let payload = r.take(len * precision.byte_width())?;
            let data: Vec<f64> = match precision {
                Precision::F32 => payload
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                    .collect(),
                Precision::F64 => payload
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            };
            tensors.push(TensorRecord {
                name,
                trainable,
                shape,
                data,
            });
        }
        Ok(Checkpoint {
            precision,
            episode,
            rng_state,
            config_json,
            tensors,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::decode(&std::fs::read(path)?)
    }
}
