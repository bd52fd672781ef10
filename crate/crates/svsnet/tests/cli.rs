use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use svsnet::manifest::{parse_manifest, read_predictions, write_jsonl};
use svsnet_core::metrics::Prediction;

fn svsnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_svsnet")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = svsnet(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const TINY: &str = r#"
[train]
epochs = 1
max_steps = 2
[train.model]
head_hidden = 8
[train.model.encoder]
channels = 4
rnn_hidden = 4
[train.model.encoder.sinc]
filters = 4
"#;

fn synth(dir: &Path) -> PathBuf {
    let out = ok(&[
        "synth", "--pairs", "12", "--speakers", "3", "--seed", "7", "--min-duration", "0.5", "--max-duration", "0.6",
        "--out", s(dir),
    ]);
    PathBuf::from(out.trim())
}

fn train(dir: &Path, manifest: &Path, extra: &str, flags: &[&str]) -> PathBuf {
    let config = dir.join("run.toml");
    let ck_dir = dir.join("ck");
    std::fs::write(&config, format!("train_manifest = {:?}\ncheckpoint_dir = {:?}\n{extra}{TINY}", manifest, ck_dir)).unwrap();
    let mut args = vec!["train", "--config", s(&config)];
    args.extend_from_slice(flags);
    ok(&args);
    ck_dir.join("best.ckpt")
}

#[test]
fn synth_is_reproducible_and_validated() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ma = synth(a.path());
    let mb = synth(b.path());
    assert_eq!(ma, a.path().join("manifest.jsonl"));
    assert_eq!(std::fs::read(&ma).unwrap(), std::fs::read(&mb).unwrap());
    let first = a.path().join("wav/p00000_test.wav");
    assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(b.path().join("wav/p00000_test.wav")).unwrap());
    let records = parse_manifest(&ma).unwrap();
    assert_eq!(records.len(), 12);
    assert!(a.path().join("embeddings.jsonl").exists());

    let out = svsnet(&["synth", "--speakers", "1", "--out", s(a.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn train_predict_evaluate_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path());
    let ckpt = train(dir.path(), &manifest, "", &[]);
    assert!(ckpt.exists());
    let log = std::fs::read_to_string(dir.path().join("ck/train_log.jsonl")).unwrap();
    assert!(log.lines().count() >= 2);
    assert!(log.lines().all(|l| l.contains("\"step\"") && l.contains("\"loss\"")));

    let preds = dir.path().join("preds.jsonl");
    ok(&["predict", "--checkpoint", s(&ckpt), "--manifest", s(&manifest), "--out", s(&preds)]);
    let p = read_predictions(&preds).unwrap();
    assert_eq!(p.len(), 12);

    // swapping test and reference leaves co-attention scores unchanged
    let mut swapped = parse_manifest(&manifest).unwrap();
    for r in &mut swapped {
        std::mem::swap(&mut r.test_path, &mut r.ref_path);
    }
    let swapped_manifest = dir.path().join("swapped.jsonl");
    write_jsonl(&swapped_manifest, &swapped).unwrap();
    let swapped_preds = dir.path().join("swapped_preds.jsonl");
    ok(&["predict", "--checkpoint", s(&ckpt), "--manifest", s(&swapped_manifest), "--out", s(&swapped_preds)]);
    for (a, b) in p.iter().zip(read_predictions(&swapped_preds).unwrap()) {
        assert_eq!(a.score, b.score);
    }

    let report = dir.path().join("report.json");
    let text = ok(&[
        "evaluate", "--predictions", s(&preds), "--manifest", s(&manifest), "--level", "utterance", "--report", s(&report),
    ]);
    assert!(text.contains("level: utterance"));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["n"], 12);
    ok(&["evaluate", "--predictions", s(&preds), "--manifest", s(&manifest), "--level", "system"]);
    assert!(!svsnet(&["evaluate", "--predictions", s(&preds), "--manifest", s(&manifest), "--level", "speaker"])
        .status
        .success());
}

#[test]
fn score_fusion_mixes_three_to_seven() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path());
    let ckpt = train(dir.path(), &manifest, "", &[]);
    let emb = dir.path().join("embeddings.jsonl");
    let plain = dir.path().join("plain.jsonl");
    let fused = dir.path().join("fused.jsonl");
    ok(&["predict", "--checkpoint", s(&ckpt), "--manifest", s(&manifest), "--out", s(&plain)]);
    ok(&[
        "predict", "--checkpoint", s(&ckpt), "--manifest", s(&manifest), "--out", s(&fused), "--fusion", "score",
        "--embeddings", s(&emb), "--fusion-weight", "0.3",
    ]);
    let vectors = svsnet::manifest::read_embeddings(&emb).unwrap();
    let records = parse_manifest(&manifest).unwrap();
    for ((a, b), r) in read_predictions(&plain).unwrap().iter().zip(read_predictions(&fused).unwrap()).zip(&records) {
        let id = |p: &str| Path::new(p).file_stem().unwrap().to_str().unwrap().to_string();
        let xv = svsnet_core::head::xvector_cosine_score(&vectors[&id(&r.test_path)], &vectors[&id(&r.ref_path)]).unwrap();
        assert!((b.score - (0.3 * a.score + 0.7 * xv)).abs() < 1e-12);
    }
    let out = svsnet(&["predict", "--checkpoint", s(&ckpt), "--manifest", s(&manifest), "--out", s(&fused), "--fusion", "feature"]);
    assert!(!out.status.success());
}

#[test]
fn feature_fusion_trains_and_predicts() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path());
    let emb = dir.path().join("embeddings.jsonl");
    let ckpt = train(dir.path(), &manifest, &format!("embeddings = {:?}\n", emb), &["--fusion-dim", "128"]);
    let preds = dir.path().join("p.jsonl");
    let base = ["predict", "--checkpoint", s(&ckpt), "--manifest", s(&manifest), "--out", s(&preds)];
    assert!(!svsnet(&base).status.success());
    let mut args = base.to_vec();
    args.extend_from_slice(&["--fusion", "feature", "--embeddings", s(&emb)]);
    ok(&args);
    assert_eq!(read_predictions(&preds).unwrap().len(), 12);
}

#[test]
fn classification_mode_predicts_labels() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path());
    let ckpt = train(dir.path(), &manifest, "", &["--mode", "classification"]);
    let preds = dir.path().join("p.jsonl");
    ok(&["predict", "--checkpoint", s(&ckpt), "--manifest", s(&manifest), "--out", s(&preds)]);
    let p: Vec<Prediction> = read_predictions(&preds).unwrap();
    assert!(p.iter().all(|p| p.label.is_some_and(|l| (1..=4).contains(&l)) && p.score == p.label.unwrap() as f64));
}

#[test]
fn missing_inputs_fail_without_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let ck_dir = dir.path().join("ck");
    let out = svsnet(&[
        "train", "--manifest", s(&dir.path().join("absent.jsonl")), "--checkpoint-dir", s(&ck_dir),
    ]);
    assert!(!out.status.success());
    assert!(!ck_dir.join("best.ckpt").exists());

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "train_manifest = \"m.jsonl\"\nsurprise = true\n").unwrap();
    assert!(!svsnet(&["train", "--config", s(&bad)]).status.success());
}
