//! TOML run configuration for `svsnet train`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use svsnet_core::training::TrainConfig;

/// Paths plus the training configuration. Every field except
/// `train_manifest` has a default; unknown keys are rejected.
///
/// ```toml
/// train_manifest = "data/manifest.jsonl"
/// checkpoint_dir = "runs/r1"
///
/// [train]
/// epochs = 10
///
/// [train.model]
/// output = "classification"
///
/// [train.model.encoder]
/// frontend = "spectrogram"
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub train_manifest: PathBuf,
    /// Separate validation manifest; by default the `val` split of
    /// `train_manifest` is used.
    #[serde(default)]
    pub val_manifest: Option<PathBuf>,
    /// Receives `best.ckpt` and `train_log.jsonl`.
    #[serde(default = "default_checkpoint_dir")]
    pub checkpoint_dir: PathBuf,
    /// Utterance embeddings for feature fusion (`train.model.fusion_dim > 0`).
    #[serde(default)]
    pub embeddings: Option<PathBuf>,
    #[serde(default)]
    pub train: TrainConfig,
}

fn default_checkpoint_dir() -> PathBuf {
    PathBuf::from("checkpoints")
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
}

impl RunConfig {
    pub fn new(train_manifest: PathBuf) -> Self {
        RunConfig {
            train_manifest,
            val_manifest: None,
            checkpoint_dir: default_checkpoint_dir(),
            embeddings: None,
            train: TrainConfig::default(),
        }
    }

    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|source| ConfigError::Parse { path: path.to_path_buf(), source })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml(&text, path)
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint_dir.join("best.ckpt")
    }

    pub fn log_path(&self) -> PathBuf {
        self.checkpoint_dir.join("train_log.jsonl")
    }
}
