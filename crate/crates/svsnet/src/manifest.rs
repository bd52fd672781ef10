//! JSON-lines manifests, prediction files and embedding files.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use svsnet_core::data::PairRecord;
use svsnet_core::head::ExternalEmbedding;
use svsnet_core::metrics::Prediction;

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {source}")]
    Parse { path: PathBuf, line: usize, source: serde_json::Error },
    #[error("{path}:{line}: {source}")]
    Invalid { path: PathBuf, line: usize, source: svsnet_core::Error },
    #[error("{path}: duplicate utterance_id {id}")]
    Duplicate { path: PathBuf, id: String },
}

/// Parses one JSON object per non-blank line, reporting 1-based line numbers.
pub fn parse_jsonl<T: DeserializeOwned>(text: &str, path: &Path) -> Result<Vec<(usize, T)>, ManifestError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map(|v| (i + 1, v))
                .map_err(|source| ManifestError::Parse { path: path.to_path_buf(), line: i + 1, source })
        })
        .collect()
}

fn read(path: &Path) -> Result<String, ManifestError> {
    std::fs::read_to_string(path).map_err(|source| ManifestError::Io { path: path.to_path_buf(), source })
}

pub fn parse_manifest_str(text: &str, path: &Path) -> Result<Vec<PairRecord>, ManifestError> {
    parse_jsonl::<PairRecord>(text, path)?
        .into_iter()
        .map(|(line, r)| {
            r.validate().map_err(|source| ManifestError::Invalid { path: path.to_path_buf(), line, source })?;
            Ok(r)
        })
        .collect()
}

/// Order-preserving parse of a pair-score manifest.
pub fn parse_manifest(path: &Path) -> Result<Vec<PairRecord>, ManifestError> {
    parse_manifest_str(&read(path)?, path)
}

pub fn read_predictions(path: &Path) -> Result<Vec<Prediction>, ManifestError> {
    Ok(parse_jsonl(&read(path)?, path)?.into_iter().map(|(_, p)| p).collect())
}

/// Embeddings keyed by utterance id.
pub fn read_embeddings(path: &Path) -> Result<HashMap<String, Vec<f64>>, ManifestError> {
    let mut out = HashMap::new();
    for (_, e) in parse_jsonl::<ExternalEmbedding>(&read(path)?, path)? {
        if out.contains_key(&e.utterance_id) {
            return Err(ManifestError::Duplicate { path: path.to_path_buf(), id: e.utterance_id });
        }
        out.insert(e.utterance_id, e.vector);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), ManifestError> {
    let io = |source| ManifestError::Io { path: path.to_path_buf(), source };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    for item in items {
        serde_json::to_writer(&mut w, item).expect("serialisable record");
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Manifest paths are relative to the manifest's directory unless absolute.
pub fn resolve(manifest: &Path, entry: &str) -> PathBuf {
    let p = Path::new(entry);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        manifest.parent().unwrap_or(Path::new("")).join(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use svsnet_core::data::Split;

    fn p() -> &'static Path {
        Path::new("m.jsonl")
    }

    #[test]
    fn parses_the_documented_line() {
        let line = r#"{"pair_id":"p1","system_id":"A","test_path":"a.wav","ref_path":"b.wav","score":3,"split":"train"}"#;
        let recs = parse_manifest_str(line, p()).unwrap();
        assert_eq!(
            recs,
            vec![PairRecord {
                pair_id: "p1".into(),
                system_id: "A".into(),
                test_path: "a.wav".into(),
                ref_path: "b.wav".into(),
                score: 3,
                split: Split::Train,
            }]
        );
    }

    #[test]
    fn empty_file_is_empty_list() {
        assert!(parse_manifest_str("", p()).unwrap().is_empty());
        assert!(parse_manifest_str("\n  \n", p()).unwrap().is_empty());
    }

    #[test]
    fn errors_name_the_line() {
        let good = r#"{"pair_id":"p1","system_id":"A","test_path":"a.wav","ref_path":"b.wav","score":3,"split":"train"}"#;
        let bad = good.replace("\"score\":3", "\"score\":5");
        let err = parse_manifest_str(&format!("{good}\n{bad}\n"), p()).unwrap_err();
        assert!(matches!(err, ManifestError::Invalid { line: 2, .. }), "{err}");
        assert!(err.to_string().contains("m.jsonl:2"));

        let err = parse_manifest_str(&format!("{good}\n\n{{oops\n"), p()).unwrap_err();
        assert!(matches!(err, ManifestError::Parse { line: 3, .. }));

        let extra = good.replace("}", ",\"extra\":1}");
        assert!(parse_manifest_str(&extra, p()).is_err());
    }

    #[test]
    fn resolves_relative_paths() {
        assert_eq!(resolve(Path::new("data/m.jsonl"), "a.wav"), PathBuf::from("data/a.wav"));
        assert_eq!(resolve(Path::new("m.jsonl"), "/x/a.wav"), PathBuf::from("/x/a.wav"));
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.jsonl");
        let items = vec![
            ExternalEmbedding { utterance_id: "u1".into(), vector: vec![0.5, -1.0] },
            ExternalEmbedding { utterance_id: "u2".into(), vector: vec![2.0, 0.0] },
        ];
        write_jsonl(&path, &items).unwrap();
        let map = read_embeddings(&path).unwrap();
        assert_eq!(map["u2"], vec![2.0, 0.0]);
        write_jsonl(&path, &[items[0].clone(), items[0].clone()]).unwrap();
        assert!(matches!(read_embeddings(&path), Err(ManifestError::Duplicate { .. })));
    }
}
