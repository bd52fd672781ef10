//! Self-describing binary checkpoints.
//!
//! Layout: the 8-byte magic `SVSNETCK`, a little-endian `u32` format version,
//! a `u64` header length, a JSON header (training config, step, tensor names
//! and shapes), then every tensor's `f32` values little-endian in header order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use svsnet_core::params::Tensor;
use svsnet_core::training::TrainConfig;
use svsnet_core::{ParamStore, Svsnet};

const MAGIC: &[u8; 8] = b"SVSNETCK";
const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: not a checkpoint (bad magic)")]
    BadMagic { path: PathBuf },
    #[error("{path}: unsupported checkpoint version {version}")]
    Version { path: PathBuf, version: u32 },
    #[error("{path}: malformed header: {source}")]
    Header { path: PathBuf, source: serde_json::Error },
    #[error("{path}: parameters do not match the stored model configuration")]
    Mismatch { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub step: u64,
    pub params: ParamStore<f32>,
}

#[derive(Serialize, Deserialize)]
struct TensorHeader {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: TrainConfig,
    step: u64,
    tensors: Vec<TensorHeader>,
}

impl Checkpoint {
    pub fn model(&self) -> Svsnet {
        Svsnet::new(self.config.model).0
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let io = |source| CheckpointError::Io { path: path.to_path_buf(), source };
        let header = Header {
            config: self.config,
            step: self.step,
            tensors: self
                .params
                .tensors()
                .iter()
                .map(|t| TensorHeader { name: t.name.clone(), shape: t.shape.clone() })
                .collect(),
        };
        let json = serde_json::to_vec(&header).expect("serialisable header");
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        w.write_all(MAGIC).map_err(io)?;
        w.write_all(&VERSION.to_le_bytes()).map_err(io)?;
        w.write_all(&(json.len() as u64).to_le_bytes()).map_err(io)?;
        w.write_all(&json).map_err(io)?;
        for t in self.params.tensors() {
            for v in &t.data {
                w.write_all(&v.to_le_bytes()).map_err(io)?;
            }
        }
        w.flush().map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let io = |source| CheckpointError::Io { path: path.to_path_buf(), source };
        let mut r = BufReader::new(File::open(path).map_err(io)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != MAGIC {
            return Err(CheckpointError::BadMagic { path: path.to_path_buf() });
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word).map_err(io)?;
        let version = u32::from_le_bytes(word);
        if version != VERSION {
            return Err(CheckpointError::Version { path: path.to_path_buf(), version });
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len).map_err(io)?;
        let mut json = vec![0u8; u64::from_le_bytes(len) as usize];
        r.read_exact(&mut json).map_err(io)?;
        let header: Header =
            serde_json::from_slice(&json).map_err(|source| CheckpointError::Header { path: path.to_path_buf(), source })?;
        let mut tensors = Vec::with_capacity(header.tensors.len());
        for th in header.tensors {
            let n: usize = th.shape.iter().product();
            let mut bytes = vec![0u8; 4 * n];
            r.read_exact(&mut bytes).map_err(io)?;
            let data = bytes.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
            tensors.push(Tensor { name: th.name, shape: th.shape, data });
        }
        let mut rest = Vec::new();
        r.read_to_end(&mut rest).map_err(io)?;
        let params = ParamStore::from_tensors(tensors);
        let (_, layout) = Svsnet::new(header.config.model);
        if !rest.is_empty() || !params.matches(&layout) {
            return Err(CheckpointError::Mismatch { path: path.to_path_buf() });
        }
        Ok(Checkpoint { config: header.config, step: header.step, params })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use svsnet_core::encoder::EncoderConfig;
    use svsnet_core::frontend::SincConfig;
    use svsnet_core::ModelConfig;

    fn tiny() -> TrainConfig {
        TrainConfig {
            model: ModelConfig {
                encoder: EncoderConfig {
                    sinc: SincConfig { filters: 4, ..Default::default() },
                    channels: 4,
                    rnn_hidden: 4,
                    ..Default::default()
                },
                head_hidden: 4,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let config = tiny();
        let (_, params) = Svsnet::init_params::<f32>(config.model, 9);
        let ck = Checkpoint { config, step: 42, params };
        ck.save(&path).unwrap();
        assert_eq!(Checkpoint::load(&path).unwrap(), ck);
    }

    #[test]
    fn rejects_foreign_and_mismatched_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.ckpt");
        std::fs::write(&path, b"garbage!garbage!").unwrap();
        assert!(matches!(Checkpoint::load(&path), Err(CheckpointError::BadMagic { .. })));

        let config = tiny();
        let (_, params) = Svsnet::init_params::<f32>(config.model, 1);
        let mut other = config;
        other.model.head_hidden = 5;
        Checkpoint { config: other, step: 0, params }.save(&path).unwrap();
        assert!(matches!(Checkpoint::load(&path), Err(CheckpointError::Mismatch { .. })));
    }
}
