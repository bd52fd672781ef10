//! Batch prediction over a manifest, with optional x-vector fusion.

use std::path::Path;

use anyhow::{bail, ensure};
use svsnet_core::data::{group_by_pair, PairRecord};
use svsnet_core::head::{score_fusion, xvector_cosine_score};
use svsnet_core::metrics::Prediction;
use svsnet_core::PairInput;

use crate::checkpoint::Checkpoint;
use crate::manifest::resolve;
use crate::train::{AudioCache, Embeddings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Fusion {
    #[default]
    None,
    /// Mix the network score with the embedding cosine score.
    Score,
    /// Feed embedding differences to the head (model trained with fusion).
    Feature,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictOptions {
    pub fusion: Fusion,
    /// Weight of the network score in score fusion.
    pub fusion_weight: f64,
    /// Report the probability-weighted score of a classification model
    /// instead of its label.
    pub expected_score: bool,
}

impl Default for PredictOptions {
    fn default() -> Self {
        PredictOptions {
            fusion: Fusion::None,
            fusion_weight: svsnet_core::head::DEFAULT_FUSION_WEIGHT,
            expected_score: false,
        }
    }
}

/// One prediction per distinct pair, in first-appearance order.
pub fn predict_records(
    checkpoint: &Checkpoint,
    records: &[PairRecord],
    manifest: &Path,
    embeddings: Option<&Embeddings>,
    opts: PredictOptions,
) -> anyhow::Result<Vec<Prediction>> {
    let model = checkpoint.model();
    let fusion_dim = checkpoint.config.model.fusion_dim;
    match opts.fusion {
        Fusion::Feature if fusion_dim == 0 => bail!("checkpoint was not trained with feature fusion"),
        Fusion::None | Fusion::Score if fusion_dim > 0 => {
            bail!("checkpoint expects feature fusion with {fusion_dim}-dimensional embeddings")
        }
        Fusion::Score | Fusion::Feature => ensure!(embeddings.is_some(), "{:?} fusion needs --embeddings", opts.fusion),
        Fusion::None => {}
    }
    ensure!((0.0..=1.0).contains(&opts.fusion_weight), "fusion weight must lie in [0, 1]");
    if let (Fusion::Feature, Some(e)) = (opts.fusion, embeddings) {
        ensure!(e.dim == fusion_dim, "embeddings have {} values, checkpoint expects {fusion_dim}", e.dim);
    }
    let mut cache = AudioCache::default();
    let mut out = Vec::new();
    for g in group_by_pair(records) {
        let (tp, rp) = (resolve(manifest, &g.test_path), resolve(manifest, &g.ref_path));
        let (test, reference) = (cache.get(&tp)?, cache.get(&rp)?);
        let emb = match embeddings {
            Some(e) if opts.fusion != Fusion::None => Some((e.get(&tp)?, e.get(&rp)?)),
            _ => None,
        };
        let cast = |v: &[f64]| v.iter().map(|&x| x as f32).collect::<Vec<f32>>();
        let fused = match (opts.fusion, emb) {
            (Fusion::Feature, Some((a, b))) => Some((cast(a), cast(b))),
            _ => None,
        };
        let mut input = PairInput::new(&test[..], &reference[..]);
        if let Some((a, b)) = &fused {
            input.embeddings = Some((&a[..], &b[..]));
        }
        let score = model.score(&checkpoint.params, input)?;
        let label = score.label();
        let mut value = if opts.expected_score { score.expected() } else { score.value() };
        if let (Fusion::Score, Some((a, b))) = (opts.fusion, emb) {
            value = score_fusion(value, xvector_cosine_score(a, b)?, opts.fusion_weight);
        }
        out.push(Prediction { pair_id: g.pair_id, system_id: g.system_id, score: value, label });
    }
    Ok(out)
}
