//! Loading pair data from disk and the training driver behind `svsnet train`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use svsnet_core::data::{group_by_pair, PairRecord, Split};
use svsnet_core::training::{fit, EvalSample, TrainSample, Trainer, ValidationSummary};

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::manifest::{parse_manifest, read_embeddings, resolve};
use crate::wav::{load_waveform, utterance_id};

/// Decodes each distinct audio file once.
#[derive(Default)]
pub struct AudioCache {
    waves: HashMap<PathBuf, Arc<[f32]>>,
}

impl AudioCache {
    pub fn get(&mut self, path: &Path) -> anyhow::Result<Arc<[f32]>> {
        if let Some(w) = self.waves.get(path) {
            return Ok(w.clone());
        }
        let w: Arc<[f32]> = Arc::from(load_waveform(path)?.samples);
        self.waves.insert(path.to_path_buf(), w.clone());
        Ok(w)
    }
}

/// Embedding lookup keyed by utterance id (audio file stem).
pub struct Embeddings {
    pub dim: usize,
    pub vectors: HashMap<String, Vec<f64>>,
}

impl Embeddings {
    pub fn load(path: &Path, dim: usize) -> anyhow::Result<Self> {
        let vectors = read_embeddings(path)?;
        if let Some((id, v)) = vectors.iter().find(|(_, v)| v.len() != dim) {
            bail!("{}: embedding {id} has {} values, model expects {dim}", path.display(), v.len());
        }
        Ok(Embeddings { dim, vectors })
    }

    pub fn get(&self, audio: &Path) -> anyhow::Result<&[f64]> {
        let id = utterance_id(audio);
        self.vectors.get(&id).map(Vec::as_slice).with_context(|| format!("no embedding for utterance {id}"))
    }

    fn pair(&self, test: &Path, reference: &Path) -> anyhow::Result<(Arc<[f32]>, Arc<[f32]>)> {
        let cast = |v: &[f64]| -> Arc<[f32]> { v.iter().map(|&x| x as f32).collect() };
        Ok((cast(self.get(test)?), cast(self.get(reference)?)))
    }
}

pub fn load_train_samples(
    records: &[PairRecord],
    manifest: &Path,
    cache: &mut AudioCache,
    embeddings: Option<&Embeddings>,
) -> anyhow::Result<Vec<TrainSample<f32>>> {
    records
        .iter()
        .map(|r| {
            let (tp, rp) = (resolve(manifest, &r.test_path), resolve(manifest, &r.ref_path));
            Ok(TrainSample {
                test: cache.get(&tp)?,
                reference: cache.get(&rp)?,
                embeddings: embeddings.map(|e| e.pair(&tp, &rp)).transpose()?,
                rating: r.score,
            })
        })
        .collect()
}

/// One sample per distinct pair, labelled with the mean rating.
pub fn load_eval_samples(
    records: &[PairRecord],
    manifest: &Path,
    cache: &mut AudioCache,
    embeddings: Option<&Embeddings>,
) -> anyhow::Result<Vec<EvalSample<f32>>> {
    group_by_pair(records)
        .iter()
        .map(|g| {
            let (tp, rp) = (resolve(manifest, &g.test_path), resolve(manifest, &g.ref_path));
            Ok(EvalSample {
                test: cache.get(&tp)?,
                reference: cache.get(&rp)?,
                embeddings: embeddings.map(|e| e.pair(&tp, &rp)).transpose()?,
                mean_score: g.mean_score,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: PathBuf,
    pub log: PathBuf,
    pub steps: u64,
    pub best_step: u64,
    pub best_validation: Option<ValidationSummary>,
}

/// Trains on the `train` split, selects on validation pairs, and writes the
/// best checkpoint plus a JSON-lines log. Nothing is written when inputs fail
/// to load.
pub fn run_training(run: &RunConfig) -> anyhow::Result<TrainOutcome> {
    let config = run.train;
    config.validate()?;
    let records = parse_manifest(&run.train_manifest)?;
    let train_records: Vec<PairRecord> = records.iter().filter(|r| r.split == Split::Train).cloned().collect();
    if train_records.is_empty() {
        bail!("{}: no training records", run.train_manifest.display());
    }
    let (val_records, val_manifest) = match &run.val_manifest {
        Some(path) => (parse_manifest(path)?, path.clone()),
        None => (
            records.iter().filter(|r| r.split == Split::Val).cloned().collect(),
            run.train_manifest.clone(),
        ),
    };
    let fusion_dim = config.model.fusion_dim;
    let embeddings = match (&run.embeddings, fusion_dim) {
        (_, 0) => None,
        (Some(path), dim) => Some(Embeddings::load(path, dim)?),
        (None, _) => bail!("feature fusion (fusion_dim = {fusion_dim}) needs an embeddings file"),
    };
    let mut cache = AudioCache::default();
    let train = load_train_samples(&train_records, &run.train_manifest, &mut cache, embeddings.as_ref())?;
    let val = load_eval_samples(&val_records, &val_manifest, &mut cache, embeddings.as_ref())?;

    std::fs::create_dir_all(&run.checkpoint_dir)
        .with_context(|| format!("cannot create {}", run.checkpoint_dir.display()))?;
    let log_path = run.log_path();
    let mut log = BufWriter::new(File::create(&log_path).with_context(|| format!("cannot create {}", log_path.display()))?);
    let mut log_err = None;
    let mut trainer = Trainer::<f32>::new(&config)?;
    let outcome = fit(&mut trainer, &config, &train, &val, |entry| {
        if log_err.is_none() {
            if let Err(e) = serde_json::to_writer(&mut log, entry).map_err(std::io::Error::from).and_then(|_| log.write_all(b"\n")) {
                log_err = Some(e);
            }
        }
    })?;
    if let Some(e) = log_err {
        return Err(e).with_context(|| format!("writing {}", log_path.display()));
    }
    log.flush()?;
    let checkpoint = run.checkpoint_path();
    Checkpoint { config, step: outcome.best_step, params: outcome.best }.save(&checkpoint)?;
    Ok(TrainOutcome {
        checkpoint,
        log: log_path,
        steps: outcome.steps,
        best_step: outcome.best_step,
        best_validation: outcome.best_validation,
    })
}
