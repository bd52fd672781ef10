//! Deterministic synthetic speakers, utterances and labelled similarity pairs.
//!
//! A speaker is a fundamental frequency, three formants and a spectral tilt.
//! Pair labels follow the 1 (same speaker) .. 4 (different speakers) scale:
//! same-speaker pairs get 1, different-speaker pairs get 2, 3 or 4 by the
//! tertile of their normalised parameter distance.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::data::Split;
use crate::error::{invalid, Result};
use crate::rng::Rng;
use crate::signal::{Waveform, MODEL_SAMPLE_RATE};

pub const F0_RANGE: (f64, f64) = (80.0, 300.0);
pub const FORMANT_RANGES: [(f64, f64); 3] = [(300.0, 850.0), (900.0, 2300.0), (2400.0, 3400.0)];
const FORMANT_BANDWIDTHS: [f64; 3] = [80.0, 100.0, 120.0];
/// dB per octave.
pub const TILT_RANGE: (f64, f64) = (-12.0, -3.0);
pub const DURATION_RANGE: (f64, f64) = (0.5, 5.0);
const NOISE_DB: f64 = -30.0;
const VIBRATO_DEPTH: f64 = 0.004;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerParams {
    pub f0: f64,
    pub formants: [f64; 3],
    pub tilt: f64,
    pub seed: u64,
}

pub fn gen_speaker(seed: u64) -> SpeakerParams {
    let mut rng = Rng::derived(seed, 0x5EA7);
    let f0 = rng.range(F0_RANGE.0, F0_RANGE.1);
    let mut formants = [0.0; 3];
    for (f, (lo, hi)) in formants.iter_mut().zip(FORMANT_RANGES) {
        *f = rng.range(lo, hi);
    }
    let tilt = rng.range(TILT_RANGE.0, TILT_RANGE.1);
    SpeakerParams { f0, formants, tilt, seed }
}

impl SpeakerParams {
    /// Parameters scaled to comparable units (f0 on a log axis).
    pub fn normalized(&self) -> [f64; 5] {
        let lf = |x: f64| libm::log2(x);
        let mut v = [0.0; 5];
        v[0] = (lf(self.f0) - lf(F0_RANGE.0)) / (lf(F0_RANGE.1) - lf(F0_RANGE.0));
        for i in 0..3 {
            let (lo, hi) = FORMANT_RANGES[i];
            v[i + 1] = (self.formants[i] - lo) / (hi - lo);
        }
        v[4] = (self.tilt - TILT_RANGE.0) / (TILT_RANGE.1 - TILT_RANGE.0);
        v
    }

    pub fn distance(&self, other: &SpeakerParams) -> f64 {
        let (a, b) = (self.normalized(), other.normalized());
        libm::sqrt(a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum())
    }
}

/// Two-pole resonator `y[n] = g x[n] + 2 r cos(w) y[n-1] - r^2 y[n-2]`.
fn resonate(x: &mut [f64], freq: f64, bandwidth: f64, rate: f64) {
    let r = libm::exp(-core::f64::consts::PI * bandwidth / rate);
    let a1 = 2.0 * r * libm::cos(TAU * freq / rate);
    let a2 = -r * r;
    let gain = 1.0 - r;
    let (mut y1, mut y2) = (0.0, 0.0);
    for v in x.iter_mut() {
        let y = gain * *v + a1 * y1 + a2 * y2;
        y2 = y1;
        y1 = y;
        *v = y;
    }
}

/// Harmonic source at `f0` with slight vibrato and a syllable-like envelope,
/// shaped by the speaker's formant resonators, plus noise 30 dB down.
pub fn gen_utterance(sp: &SpeakerParams, duration_s: f64, seed: u64) -> Result<Waveform> {
    if !(DURATION_RANGE.0..=DURATION_RANGE.1).contains(&duration_s) {
        return Err(invalid(format!(
            "duration {duration_s} s outside [{}, {}]",
            DURATION_RANGE.0, DURATION_RANGE.1
        )));
    }
    let rate = MODEL_SAMPLE_RATE as f64;
    let n = libm::round(duration_s * rate) as usize;
    let mut rng = Rng::derived(sp.seed ^ 0xA11CE, seed);
    let vib_rate = rng.range(4.0, 6.0);
    let vib_phase = rng.range(0.0, TAU);
    let harmonics = (7000.0 / (sp.f0 * (1.0 + VIBRATO_DEPTH))) as usize;
    let amps: Vec<f64> = (1..=harmonics).map(|h| libm::pow(10.0, sp.tilt * libm::log2(h as f64) / 20.0)).collect();
    let phases: Vec<f64> = (0..harmonics).map(|_| rng.range(0.0, TAU)).collect();

    // syllables: raised-cosine bumps of random length and loudness
    let mut envelope = vec![0.0; n];
    let mut start = 0usize;
    while start < n {
        let len = (rng.range(0.12, 0.25) * rate) as usize;
        let loud = rng.range(0.4, 1.0);
        for i in 0..len.min(n - start) {
            envelope[start + i] = loud * 0.5 * (1.0 - libm::cos(TAU * i as f64 / len as f64));
        }
        start += len;
    }

    let mut x = vec![0.0; n];
    let mut phase = 0.0;
    for (i, v) in x.iter_mut().enumerate() {
        let t = i as f64 / rate;
        let f = sp.f0 * (1.0 + VIBRATO_DEPTH * libm::sin(TAU * vib_rate * t + vib_phase));
        let mut s = 0.0;
        for (h, (&a, &p)) in amps.iter().zip(&phases).enumerate() {
            s += a * libm::sin((h + 1) as f64 * phase + p);
        }
        *v = s * (0.05 + envelope[i]);
        phase = (phase + TAU * f / rate) % TAU;
    }
    for (k, &f) in sp.formants.iter().enumerate() {
        resonate(&mut x, f, FORMANT_BANDWIDTHS[k], rate);
    }
    let rms = libm::sqrt(x.iter().map(|v| v * v).sum::<f64>() / n as f64);
    let noise = rms * libm::pow(10.0, NOISE_DB / 20.0);
    for v in x.iter_mut() {
        *v += noise * rng.normal();
    }
    let samples = x.iter().map(|&v| v as f32).collect();
    Ok(Waveform::new(samples, MODEL_SAMPLE_RATE, format!("spk{}_{seed}", sp.seed))?.peak_normalized())
}

/// Label function over a fixed speaker set: 1 for identical speakers,
/// otherwise 2/3/4 by the distance tertile among all distinct speaker pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct PairLabeler {
    n: usize,
    labels: Vec<u8>,
}

impl PairLabeler {
    pub fn new(speakers: &[SpeakerParams]) -> Self {
        let n = speakers.len();
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                pairs.push((speakers[i].distance(&speakers[j]), i, j));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let m = pairs.len();
        let mut labels = vec![1u8; n * n];
        for (rank, &(d, i, j)) in pairs.iter().enumerate() {
            let label = if d == 0.0 { 1 } else { 2 + ((3 * (rank + 1)).div_ceil(m) - 1) as u8 };
            labels[i * n + j] = label;
            labels[j * n + i] = label;
        }
        PairLabeler { n, labels }
    }

    pub fn label(&self, a: usize, b: usize) -> u8 {
        self.labels[a * self.n + b]
    }

    /// Unordered distinct speaker pairs carrying `label`.
    pub fn pairs_with(&self, label: u8) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in i + 1..self.n {
                if self.label(i, j) == label {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub pairs: usize,
    pub speakers: usize,
    pub seed: u64,
    pub min_duration: f64,
    pub max_duration: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { pairs: 600, speakers: 12, seed: 0, min_duration: 1.0, max_duration: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedPair {
    pub index: usize,
    pub test_speaker: usize,
    pub ref_speaker: usize,
    pub test_seed: u64,
    pub ref_seed: u64,
    pub test_duration: f64,
    pub ref_duration: f64,
    pub label: u8,
    pub split: Split,
}

/// Every sixth pair is held out, alternating between test and validation.
pub fn split_for(index: usize) -> Split {
    if index % 6 != 5 {
        Split::Train
    } else if (index / 6) % 2 == 0 {
        Split::Test
    } else {
        Split::Val
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairPlan {
    pub speakers: Vec<SpeakerParams>,
    pub labeler: PairLabeler,
    pub pairs: Vec<PlannedPair>,
}

/// Speakers and pair assignments; classes 1..4 are balanced by construction.
pub fn plan_pairs(cfg: &SynthConfig) -> Result<PairPlan> {
    if cfg.speakers < 2 {
        return Err(invalid("at least two speakers are required"));
    }
    if !(DURATION_RANGE.0 <= cfg.min_duration && cfg.min_duration <= cfg.max_duration && cfg.max_duration <= DURATION_RANGE.1) {
        return Err(invalid("durations must satisfy 0.5 <= min <= max <= 5 seconds"));
    }
    let speakers: Vec<SpeakerParams> =
        (0..cfg.speakers).map(|i| gen_speaker(cfg.seed.wrapping_mul(1000).wrapping_add(i as u64))).collect();
    let labeler = PairLabeler::new(&speakers);
    let buckets: Vec<Vec<(usize, usize)>> = (2..=4).map(|l| labeler.pairs_with(l)).collect();
    let mut rng = Rng::derived(cfg.seed, 0xDA7A);
    let mut classes: Vec<u8> = (0..cfg.pairs).map(|i| (i % 4) as u8 + 1).collect();
    rng.shuffle(&mut classes);
    let mut pairs = Vec::with_capacity(cfg.pairs);
    for (index, &class) in classes.iter().enumerate() {
        let bucket = if class == 1 { None } else { Some(&buckets[class as usize - 2]) };
        let (test_speaker, ref_speaker) = match bucket {
            Some(b) if !b.is_empty() => {
                let (i, j) = b[rng.below(b.len())];
                if rng.uniform() < 0.5 { (i, j) } else { (j, i) }
            }
            _ => {
                let s = rng.below(cfg.speakers);
                (s, s)
            }
        };
        let mut duration = || rng.range(cfg.min_duration, cfg.max_duration);
        let (test_duration, ref_duration) = (duration(), duration());
        pairs.push(PlannedPair {
            index,
            test_speaker,
            ref_speaker,
            test_seed: 2 * index as u64 + 1,
            ref_seed: 2 * index as u64 + 2,
            test_duration: libm::round(test_duration * 1000.0) / 1000.0,
            ref_duration: libm::round(ref_duration * 1000.0) / 1000.0,
            label: labeler.label(test_speaker, ref_speaker),
            split: split_for(index),
        });
    }
    Ok(PairPlan { speakers, labeler, pairs })
}

/// Stand-in speaker embedding: a fixed random projection of the normalised
/// speaker parameters plus per-utterance jitter.
pub fn pseudo_xvector(sp: &SpeakerParams, utterance_seed: u64, dim: usize) -> Vec<f64> {
    let mut proj = Rng::new(0x0E_B0_D1);
    let v = sp.normalized();
    let mut jitter = Rng::derived(sp.seed ^ 0xE3B, utterance_seed);
    (0..dim)
        .map(|_| {
            let z: f64 = v.iter().map(|&x| (x - 0.5) * proj.normal()).sum::<f64>() + 0.3 * proj.normal();
            libm::tanh(z) + 0.05 * jitter.normal()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn speakers_are_seeded_and_in_range() {
        assert_eq!(gen_speaker(4), gen_speaker(4));
        assert_ne!(gen_speaker(4), gen_speaker(5));
        for s in 0..200 {
            let sp = gen_speaker(s);
            assert!((80.0..=300.0).contains(&sp.f0));
            assert!(sp.formants[0] < sp.formants[1] && sp.formants[1] < sp.formants[2]);
        }
    }

    #[test]
    fn utterance_length_and_determinism() {
        let sp = gen_speaker(1);
        let a = gen_utterance(&sp, 1.0, 7).unwrap();
        assert_eq!(a.len(), 16_000);
        assert_eq!(a, gen_utterance(&sp, 1.0, 7).unwrap());
        assert_ne!(a, gen_utterance(&sp, 1.0, 8).unwrap());
        assert!(gen_utterance(&sp, 0.2, 1).is_err());
        assert!(gen_utterance(&sp, 6.0, 1).is_err());
    }

    #[test]
    fn labels_are_symmetric_and_monotone() {
        let speakers: Vec<_> = (0..9).map(gen_speaker).collect();
        let l = PairLabeler::new(&speakers);
        let mut seen = Vec::new();
        for i in 0..9 {
            assert_eq!(l.label(i, i), 1);
            for j in 0..9 {
                assert_eq!(l.label(i, j), l.label(j, i));
                if i < j {
                    seen.push((speakers[i].distance(&speakers[j]), l.label(i, j)));
                }
            }
        }
        seen.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert!(seen.windows(2).all(|w| w[0].1 <= w[1].1));
        assert_eq!(seen.last().unwrap().1, 4);
        // 36 pairs split into tertiles of 12
        for label in 2..=4 {
            assert_eq!(l.pairs_with(label).len(), 12);
        }
    }

    #[test]
    fn identical_speakers_get_label_one() {
        let sp = gen_speaker(3);
        let l = PairLabeler::new(&[sp.clone(), sp, gen_speaker(4)]);
        assert_eq!(l.label(0, 1), 1);
    }

    #[test]
    fn plan_is_balanced_and_reproducible() {
        let cfg = SynthConfig { pairs: 600, speakers: 12, seed: 7, ..Default::default() };
        let plan = plan_pairs(&cfg).unwrap();
        assert_eq!(plan, plan_pairs(&cfg).unwrap());
        for label in 1..=4u8 {
            let count = plan.pairs.iter().filter(|p| p.label == label).count();
            assert!((135..=165).contains(&count), "label {label}: {count}");
        }
        let train = plan.pairs.iter().filter(|p| p.split == Split::Train).count();
        assert_eq!(train, 500);
        assert!(plan_pairs(&SynthConfig { speakers: 1, ..cfg }).is_err());
    }

    #[test]
    fn pseudo_xvectors_separate_speakers() {
        let a = gen_speaker(1);
        let b = gen_speaker(2);
        let a1 = pseudo_xvector(&a, 1, 128);
        let a2 = pseudo_xvector(&a, 2, 128);
        let b1 = pseudo_xvector(&b, 1, 128);
        let cos = |x: &[f64], y: &[f64]| {
            let d: f64 = x.iter().zip(y).map(|(p, q)| p * q).sum();
            d / libm::sqrt(x.iter().map(|p| p * p).sum::<f64>() * y.iter().map(|q| q * q).sum::<f64>())
        };
        assert!(cos(&a1, &a2) > cos(&a1, &b1));
    }
}
