//! Checkpoint files.
//!
//! Layout: the 8-byte magic `TSRCKPT1`, the header length as a little-endian
//! `u64`, a compact JSON header, then little-endian values of the header's
//! dtype: every parameter group in header order, then the optimizer's first
//! moments, then its second moments. The header holds no floating-point
//! fields, so encoding a decoded checkpoint reproduces its bytes exactly.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thermsr_core::{Init, ParamStore, Scalar, Tensor};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::optim::Adam;

pub const MAGIC: &[u8; 8] = b"TSRCKPT1";
const HEADER_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct Header {
    version: u32,
    dtype: String,
    step: u64,
    epoch: u64,
    config_hash: String,
    /// Resolved configuration text.
    config: String,
    /// Seed of the data stream; its position is `step`.
    data_seed: u64,
    adam_t: u64,
    groups: Vec<GroupEntry>,
}

/// Complete training state after `step` optimizer updates.
#[derive(Clone, Debug)]
pub struct Checkpoint<T> {
    pub step: u64,
    pub epoch: u64,
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub params: ParamStore<T>,
    pub adam: Adam<T>,
}

fn put<T: Scalar>(out: &mut Vec<u8>, t: &Tensor<T>) {
    for &v in &t.data {
        if T::BYTES == 4 {
            out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        } else {
            out.extend_from_slice(&v.as_f64().to_le_bytes());
        }
    }
}

fn take<T: Scalar>(bytes: &mut &[u8], shape: &[usize]) -> Result<Tensor<T>> {
    let n: usize = shape.iter().product();
    let need = n * T::BYTES;
    if bytes.len() < need {
        return Err(Error::Checkpoint("payload truncated".into()));
    }
    let (head, rest) = bytes.split_at(need);
    *bytes = rest;
    let data = head
        .chunks_exact(T::BYTES)
        .map(|b| match T::BYTES {
            4 => T::lit(f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64),
            _ => T::lit(f64::from_le_bytes(b.try_into().expect("8 bytes"))),
        })
        .collect();
    Ok(Tensor::from_vec(shape, data)?)
}

impl<T: Scalar> Checkpoint<T> {
    pub fn encode(&self) -> Vec<u8> {
        let header = Header {
            version: HEADER_VERSION,
            dtype: T::DTYPE.to_string(),
            step: self.step,
            epoch: self.epoch,
            config_hash: self.config_hash.clone(),
            config: self.config.echo(),
            data_seed: self.config.train.seed,
            adam_t: self.adam.t,
            groups: self
                .params
                .groups()
                .iter()
                .map(|g| GroupEntry { name: g.name.clone(), shape: g.value.shape.clone(), dtype: T::DTYPE.to_string() })
                .collect(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for g in self.params.groups() {
            put(&mut out, &g.value);
        }
        self.adam.m.iter().for_each(|t| put(&mut out, t));
        self.adam.v.iter().for_each(|t| put(&mut out, t));
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint (bad magic)".into()));
        }
        let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let json = bytes.get(16..16 + len).ok_or_else(|| Error::Checkpoint("header truncated".into()))?;
        let header: Header =
            serde_json::from_slice(json).map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
        if header.version != HEADER_VERSION {
            return Err(Error::Checkpoint(format!("unsupported header version {}", header.version)));
        }
        if header.dtype != T::DTYPE {
            return Err(Error::Checkpoint(format!("checkpoint holds {} values, expected {}", header.dtype, T::DTYPE)));
        }
        let config = ExperimentConfig::parse_str(&header.config)?;
        if config.hash() != header.config_hash {
            return Err(Error::Checkpoint("embedded configuration does not match its hash".into()));
        }
        let mut rest = &bytes[16 + len..];
        let mut params = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for g in &header.groups {
            let id = params.add(&g.name, &g.shape, Init::Zeros, &mut rng);
            *params.get_mut(id) = take(&mut rest, &g.shape)?;
        }
        let mut adam = Adam::new(config.adam, &params);
        adam.t = header.adam_t;
        for (m, g) in adam.m.iter_mut().zip(&header.groups) {
            *m = take(&mut rest, &g.shape)?;
        }
        for (v, g) in adam.v.iter_mut().zip(&header.groups) {
            *v = take(&mut rest, &g.shape)?;
        }
        if !rest.is_empty() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", rest.len())));
        }
        Ok(Self { step: header.step, epoch: header.epoch, config, config_hash: header.config_hash, params, adam })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes).map_err(|e| match e {
            Error::Checkpoint(m) => Error::Checkpoint(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

/// Reads only the dtype of a checkpoint file.
pub fn peek_dtype(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(Error::Checkpoint(format!("{}: not a checkpoint (bad magic)", path.display())));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let json = bytes.get(16..16 + len).ok_or_else(|| Error::Checkpoint("header truncated".into()))?;
    let header: Header = serde_json::from_slice(json).map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
    Ok(header.dtype)
}
