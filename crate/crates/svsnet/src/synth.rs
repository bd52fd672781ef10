//! Writes a synthetic pair dataset: WAVs, a pair-score manifest and
//! pseudo speaker embeddings.

use std::path::{Path, PathBuf};

use anyhow::Context;
use svsnet_core::data::PairRecord;
use svsnet_core::head::ExternalEmbedding;
use svsnet_core::synth::{gen_utterance, plan_pairs, pseudo_xvector, SynthConfig};

use crate::manifest::write_jsonl;
use crate::wav::write_waveform;

pub const EMBEDDING_DIM: usize = 128;
pub const MANIFEST: &str = "manifest.jsonl";
pub const EMBEDDINGS: &str = "embeddings.jsonl";

/// Generates the dataset under `out_dir` and returns the manifest path.
///
/// Each pair carries one rating; `system_id` names the test utterance's
/// speaker. Audio lives in `out_dir/wav/` and manifest paths are relative.
pub fn gen_pair_dataset(cfg: &SynthConfig, out_dir: &Path) -> anyhow::Result<PathBuf> {
    let plan = plan_pairs(cfg)?;
    let wav_dir = out_dir.join("wav");
    std::fs::create_dir_all(&wav_dir).with_context(|| format!("cannot create {}", wav_dir.display()))?;
    let mut records = Vec::with_capacity(plan.pairs.len());
    let mut embeddings = Vec::with_capacity(2 * plan.pairs.len());
    for p in &plan.pairs {
        let pair_id = format!("p{:05}", p.index);
        let mut paths = Vec::with_capacity(2);
        for (role, speaker, seed, duration) in
            [("test", p.test_speaker, p.test_seed, p.test_duration), ("ref", p.ref_speaker, p.ref_seed, p.ref_duration)]
        {
            let sp = &plan.speakers[speaker];
            let id = format!("{pair_id}_{role}");
            let rel = format!("wav/{id}.wav");
            write_waveform(&out_dir.join(&rel), &gen_utterance(sp, duration, seed)?)?;
            embeddings.push(ExternalEmbedding { utterance_id: id, vector: pseudo_xvector(sp, seed, EMBEDDING_DIM) });
            paths.push(rel);
        }
        let ref_path = paths.pop().expect("two paths");
        let test_path = paths.pop().expect("two paths");
        records.push(PairRecord {
            pair_id,
            system_id: format!("spk{:02}", p.test_speaker),
            test_path,
            ref_path,
            score: p.label,
            split: p.split,
        });
    }
    let manifest = out_dir.join(MANIFEST);
    write_jsonl(&manifest, &records)?;
    write_jsonl(&out_dir.join(EMBEDDINGS), &embeddings)?;
    Ok(manifest)
}
