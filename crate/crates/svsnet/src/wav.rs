//! WAV decoding into model-rate waveforms, and 16-bit PCM writing.

use std::path::{Path, PathBuf};

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use svsnet_core::signal::{mixdown, resample, MODEL_SAMPLE_RATE};
use svsnet_core::Waveform;

#[derive(Debug, thiserror::Error)]
pub enum AudioError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: hound::Error },
    #[error("{path}: unsupported audio ({reason})")]
    Unsupported { path: PathBuf, reason: String },
    #[error("{0}: no audio samples")]
    Empty(PathBuf),
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: hound::Error },
    #[error(transparent)]
    Signal(#[from] svsnet_core::Error),
}

pub const SUPPORTED_RATES: std::ops::RangeInclusive<u32> = 8_000..=48_000;

/// Utterance identifier used for embedding lookup: the file stem.
pub fn utterance_id(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Decodes 16-bit PCM (mono or stereo, 8 to 48 kHz), averages channels,
/// resamples to 16 kHz and peak-normalises.
pub fn load_waveform(path: &Path) -> Result<Waveform, AudioError> {
    let read_err = |source| AudioError::Read { path: path.to_path_buf(), source };
    let unsupported = |reason: String| AudioError::Unsupported { path: path.to_path_buf(), reason };
    let reader = WavReader::open(path).map_err(read_err)?;
    let spec = reader.spec();
    if spec.sample_format != SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(unsupported(format!("{:?} {}-bit, expected 16-bit PCM", spec.sample_format, spec.bits_per_sample)));
    }
    if !(1..=2).contains(&spec.channels) {
        return Err(unsupported(format!("{} channels", spec.channels)));
    }
    if !SUPPORTED_RATES.contains(&spec.sample_rate) {
        return Err(unsupported(format!("{} Hz", spec.sample_rate)));
    }
    let interleaved = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| v as f32 / 32768.0))
        .collect::<Result<Vec<f32>, _>>()
        .map_err(read_err)?;
    let mono = mixdown(&interleaved, spec.channels as usize);
    if mono.is_empty() {
        return Err(AudioError::Empty(path.to_path_buf()));
    }
    let wave = Waveform::new(mono, spec.sample_rate, utterance_id(path))?;
    Ok(resample(&wave, MODEL_SAMPLE_RATE)?.peak_normalized())
}

/// Writes mono 16-bit PCM, clipping to [-1, 1].
pub fn write_waveform(path: &Path, wave: &Waveform) -> Result<(), AudioError> {
    write_pcm16(path, &wave.samples, wave.sample_rate, 1)
}

/// Writes interleaved samples as 16-bit PCM.
pub fn write_pcm16(path: &Path, samples: &[f32], sample_rate: u32, channels: u16) -> Result<(), AudioError> {
    let write_err = |source| AudioError::Write { path: path.to_path_buf(), source };
    let spec = WavSpec { channels, sample_rate, bits_per_sample: 16, sample_format: SampleFormat::Int };
    let mut writer = WavWriter::create(path, spec).map_err(write_err)?;
    for &s in samples {
        writer.write_sample((s.clamp(-1.0, 1.0) * 32767.0).round() as i16).map_err(write_err)?;
    }
    writer.finalize().map_err(write_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_path_keeps_length_and_shape() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        let samples: Vec<f32> = (0..1000).map(|i| 0.25 * ((i as f32) * 0.05).sin()).collect();
        write_pcm16(&path, &samples, 16_000, 1).unwrap();
        let w = load_waveform(&path).unwrap();
        assert_eq!(w.len(), 1000);
        assert_eq!(w.sample_rate, 16_000);
        assert_eq!(w.source_id, "a");
        let peak = w.samples.iter().fold(0.0f32, |m, v| m.max(v.abs()));
        assert_eq!(peak, 1.0);
        // quantised input scaled by a single gain
        let gain = w.samples[100] / samples[100];
        for (a, b) in w.samples.iter().zip(&samples) {
            assert!((a - b * gain).abs() < 2e-4 * gain);
        }
    }

    #[test]
    fn silence_stays_silent() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("z.wav");
        write_pcm16(&path, &vec![0.0; 441], 44_100, 1).unwrap();
        let w = load_waveform(&path).unwrap();
        assert_eq!(w.len(), 160);
        assert!(w.samples.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stereo_is_averaged() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.wav");
        write_pcm16(&path, &[0.5, -0.5, 0.25, 0.25, 0.0, 0.5], 16_000, 2).unwrap();
        let w = load_waveform(&path).unwrap();
        assert_eq!(w.len(), 3);
        assert!(w.samples[0].abs() < 1e-4);
        assert!((w.samples[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn rejects_unsupported_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("missing.wav");
        assert!(matches!(load_waveform(&missing), Err(AudioError::Read { .. })));

        let float = dir.path().join("f.wav");
        let spec = WavSpec { channels: 1, sample_rate: 16_000, bits_per_sample: 32, sample_format: SampleFormat::Float };
        let mut w = WavWriter::create(&float, spec).unwrap();
        w.write_sample(0.5f32).unwrap();
        w.finalize().unwrap();
        assert!(matches!(load_waveform(&float), Err(AudioError::Unsupported { .. })));

        let slow = dir.path().join("slow.wav");
        write_pcm16(&slow, &[0.1; 10], 4_000, 1).unwrap();
        assert!(matches!(load_waveform(&slow), Err(AudioError::Unsupported { .. })));

        let empty = dir.path().join("e.wav");
        write_pcm16(&empty, &[], 16_000, 1).unwrap();
        assert!(matches!(load_waveform(&empty), Err(AudioError::Empty(_))));

        let junk = dir.path().join("j.wav");
        std::fs::write(&junk, b"not a wav file").unwrap();
        assert!(matches!(load_waveform(&junk), Err(AudioError::Read { .. })));
    }
}
