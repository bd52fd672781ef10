//! Waveform frontends: a learnable sinc band-pass filterbank and the fixed
//! magnitude-spectrogram alternative.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{Init, ParamId, ParamLayout, ParamStore};
use crate::real::{axpy, dot, Real};
use crate::signal::fft_in_place;
use crate::tensor::FeatureSequence;

pub const MIN_LOW_HZ: f64 = 30.0;
pub const MIN_BAND_HZ: f64 = 50.0;

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * libm::log10(1.0 + hz / 700.0)
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (libm::pow(10.0, mel / 2595.0) - 1.0)
}

/// Mel-spaced band edges for `k` filters: `(low cutoffs, bandwidths)` in Hz.
///
/// `k + 2` edges are spaced uniformly in mel between [`MIN_LOW_HZ`] and
/// `nyquist - (MIN_LOW_HZ + MIN_BAND_HZ)`; band `i` spans edges `i..=i+2`, so
/// neighbouring bands overlap by one edge interval.
pub fn mel_init(k: usize, sample_rate: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(k >= 1, "at least one filter");
    let high = sample_rate / 2.0 - (MIN_LOW_HZ + MIN_BAND_HZ);
    let (m0, m1) = (hz_to_mel(MIN_LOW_HZ), hz_to_mel(high));
    let edges: Vec<f64> = (0..k + 2)
        .map(|i| mel_to_hz(m0 + (m1 - m0) * i as f64 / (k + 1) as f64))
        .collect();
    let mut lows = Vec::with_capacity(k);
    let mut bands = Vec::with_capacity(k);
    for i in 0..k {
        lows.push(if i == 0 { MIN_LOW_HZ } else { edges[i] });
        bands.push(edges[i + 2] - lows[i]);
    }
    (lows, bands)
}

/// Symmetric Hamming window of odd length, mirrored so `w[c-n] == w[c+n]` exactly.
pub fn hamming(len: usize) -> Vec<f64> {
    let mut w = vec![0.0; len];
    let c = len / 2;
    for n in 0..=c {
        let v = 0.54 - 0.46 * libm::cos(2.0 * PI * (c + n) as f64 / (len - 1) as f64);
        w[c + n] = v;
        w[c - n] = v;
    }
    w
}

/// Windowed band-pass taps for cutoffs `f1 <= f2` (Hz), centred at `len / 2`.
///
/// Tap `n` is `(2 f2 sinc(2 pi f2 n) - 2 f1 sinc(2 pi f1 n)) * w(n)` with the
/// frequencies normalised by the sample rate.
pub fn sinc_impulse_response(f1: f64, f2: f64, sample_rate: f64, len: usize) -> Vec<f64> {
    let window = hamming(len);
    let (a, b) = (f1 / sample_rate, f2 / sample_rate);
    let c = len / 2;
    let mut taps = vec![0.0; len];
    taps[c] = 2.0 * (b - a) * window[c];
    for n in 1..=c {
        let t = n as f64;
        let v = (libm::sin(2.0 * PI * b * t) - libm::sin(2.0 * PI * a * t)) / (PI * t) * window[c + n];
        taps[c + n] = v;
        taps[c - n] = v;
    }
    taps
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SincConfig {
    pub filters: usize,
    pub filter_length: usize,
    pub sample_rate: f64,
    pub min_low_hz: f64,
    pub min_band_hz: f64,
}

impl Default for SincConfig {
    fn default() -> Self {
        SincConfig {
            filters: 64,
            filter_length: 251,
            sample_rate: 16_000.0,
            min_low_hz: MIN_LOW_HZ,
            min_band_hz: MIN_BAND_HZ,
        }
    }
}

impl SincConfig {
    fn nyquist(&self) -> f64 {
        self.sample_rate / 2.0
    }

    /// Effective `(f1, f2)` in Hz for raw parameters `(low, band)`.
    pub fn band_edges<T: Real>(&self, low: &[T], band: &[T]) -> Vec<(f64, f64)> {
        low.iter()
            .zip(band)
            .map(|(&l, &b)| {
                let f1 = (self.min_low_hz + l.f64().abs()).min(self.nyquist());
                let f2 = (f1 + self.min_band_hz + b.f64().abs()).min(self.nyquist());
                (f1, f2)
            })
            .collect()
    }

    /// `filters x filter_length` taps, row-major.
    pub fn impulse_responses<T: Real>(&self, low: &[T], band: &[T]) -> Vec<T> {
        let mut out = Vec::with_capacity(self.filters * self.filter_length);
        for (f1, f2) in self.band_edges(low, band) {
            out.extend(
                sinc_impulse_response(f1, f2, self.sample_rate, self.filter_length)
                    .into_iter()
                    .map(T::of),
            );
        }
        out
    }
}

/// Standalone filterbank: configuration plus its learnable cutoff parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SincFilterbank {
    pub config: SincConfig,
    pub low: Vec<f64>,
    pub band: Vec<f64>,
}

impl SincFilterbank {
    /// Mel-initialised filterbank; parameters are offsets above the floors.
    pub fn new(config: SincConfig) -> Self {
        let (lows, bands) = mel_init(config.filters, config.sample_rate);
        let low = lows.iter().map(|f| f - config.min_low_hz).collect();
        let band = bands.iter().map(|b| (b - config.min_band_hz).max(0.0)).collect();
        SincFilterbank { config, low, band }
    }

    pub fn band_edges(&self) -> Vec<(f64, f64)> {
        self.config.band_edges(&self.low, &self.band)
    }

    pub fn impulse_responses(&self) -> Vec<f64> {
        self.config.impulse_responses(&self.low, &self.band)
    }

    pub fn apply<T: Real>(&self, samples: &[T]) -> Result<FeatureSequence<T>> {
        let low: Vec<T> = self.low.iter().map(|&x| T::of(x)).collect();
        let band: Vec<T> = self.band.iter().map(|&x| T::of(x)).collect();
        Ok(sinc_forward(&self.config, &low, &band, samples)?.0)
    }
}

/// Intermediates kept for the backward pass.
#[derive(Debug, Clone)]
pub struct SincCache<T> {
    padded: Vec<T>,
    edges: Vec<(f64, f64)>,
}

fn sinc_forward<T: Real>(
    cfg: &SincConfig,
    low: &[T],
    band: &[T],
    samples: &[T],
) -> Result<(FeatureSequence<T>, SincCache<T>)> {
    let len = cfg.filter_length;
    if samples.len() < len {
        return Err(Error::TooShort { got: samples.len(), min: len });
    }
    let half = len / 2;
    let t = samples.len();
    let mut padded = vec![T::zero(); t + 2 * half];
    padded[half..half + t].copy_from_slice(samples);
    let taps = cfg.impulse_responses(low, band);
    let mut out = FeatureSequence::zeros(cfg.filters, t, cfg.sample_rate);
    for k in 0..cfg.filters {
        let h = &taps[k * len..(k + 1) * len];
        let y = out.channel_mut(k);
        // taps are symmetric, so correlation and convolution coincide
        for (j, &w) in h.iter().enumerate() {
            axpy(w, &padded[j..j + t], y);
        }
    }
    Ok((out, SincCache { padded, edges: cfg.band_edges(low, band) }))
}

/// Sinc filterbank whose cutoff parameters live in a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct SincLayer {
    pub config: SincConfig,
    pub low: ParamId,
    pub band: ParamId,
}

impl SincLayer {
    pub fn new(config: SincConfig, layout: &mut ParamLayout, prefix: &str) -> Self {
        let fb = SincFilterbank::new(config);
        let k = config.filters;
        let low = layout.add(alloc::format!("{prefix}.low_hz"), &[k], Init::Values(fb.low));
        let band = layout.add(alloc::format!("{prefix}.band_hz"), &[k], Init::Values(fb.band));
        SincLayer { config, low, band }
    }

    pub fn forward<T: Real>(
        &self,
        store: &ParamStore<T>,
        samples: &[T],
    ) -> Result<(FeatureSequence<T>, SincCache<T>)> {
        sinc_forward(&self.config, &store[self.low], &store[self.band], samples)
    }

    /// Accumulates cutoff gradients. The waveform is an input, so no input
    /// gradient is produced.
    pub fn backward<T: Real>(
        &self,
        store: &ParamStore<T>,
        cache: &SincCache<T>,
        grad_out: &FeatureSequence<T>,
        grads: &mut ParamStore<T>,
    ) {
        let cfg = &self.config;
        let len = cfg.filter_length;
        let half = len / 2;
        let t = grad_out.frames;
        let window = hamming(len);
        let nyq = cfg.nyquist();
        let low = &store[self.low];
        let band = &store[self.band];
        let mut g_low = vec![T::zero(); cfg.filters];
        let mut g_band = vec![T::zero(); cfg.filters];
        for k in 0..cfg.filters {
            let g = grad_out.channel(k);
            // dL/dtap[j]; symmetric taps share one parameterisation
            let g_tap: Vec<f64> = (0..len).map(|j| dot(g, &cache.padded[j..j + t]).f64()).collect();
            let (f1, f2) = cache.edges[k];
            let (a, b) = (f1 / cfg.sample_rate, f2 / cfg.sample_rate);
            // d tap(n) / d f = 2 cos(2 pi f n) w(n) / sample_rate
            let mut d_f1 = 0.0;
            let mut d_f2 = 0.0;
            for j in 0..len {
                let n = j as f64 - half as f64;
                let w = window[j] * 2.0 / cfg.sample_rate;
                d_f2 += g_tap[j] * w * libm::cos(2.0 * PI * b * n);
                d_f1 -= g_tap[j] * w * libm::cos(2.0 * PI * a * n);
            }
            let raw_f1 = cfg.min_low_hz + low[k].f64().abs();
            let raw_f2 = f1 + cfg.min_band_hz + band[k].f64().abs();
            let f1_free = raw_f1 < nyq;
            let f2_free = raw_f2 < nyq;
            // f2 = f1 + min_band + |band| unless clamped at Nyquist
            let d_f1_total = d_f1 + if f2_free { d_f2 } else { 0.0 };
            if f1_free {
                g_low[k] = T::of(d_f1_total) * low[k].sign0();
            }
            if f2_free {
                g_band[k] = T::of(d_f2) * band[k].sign0();
            }
        }
        for (acc, g) in grads[self.low].iter_mut().zip(g_low) {
            *acc += g;
        }
        for (acc, g) in grads[self.band].iter_mut().zip(g_band) {
            *acc += g;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrogramConfig {
    pub window: usize,
    pub hop: usize,
    pub sample_rate: f64,
}

impl Default for SpectrogramConfig {
    fn default() -> Self {
        SpectrogramConfig { window: 512, hop: 256, sample_rate: 16_000.0 }
    }
}

impl SpectrogramConfig {
    pub fn channels(&self) -> usize {
        self.window / 2 + 1
    }

    pub fn frames_for(&self, samples: usize) -> usize {
        if samples < self.window {
            0
        } else {
            1 + (samples - self.window) / self.hop
        }
    }

    /// Fewest samples that yield `frames` analysis frames.
    pub fn samples_for(&self, frames: usize) -> usize {
        self.window + frames.saturating_sub(1) * self.hop
    }
}

/// Hann-windowed magnitude spectrogram, `window / 2 + 1` channels, no padding.
pub fn spectrogram_frontend<T: Real>(samples: &[T], cfg: &SpectrogramConfig) -> Result<FeatureSequence<T>> {
    let frames = cfg.frames_for(samples.len());
    if frames == 0 {
        return Err(Error::TooShort { got: samples.len(), min: cfg.window });
    }
    let n = cfg.window;
    let hann: Vec<f64> = (0..n).map(|i| 0.5 - 0.5 * libm::cos(2.0 * PI * i as f64 / n as f64)).collect();
    let channels = cfg.channels();
    let mut out = FeatureSequence::zeros(channels, frames, cfg.sample_rate / cfg.hop as f64);
    let mut re = vec![0.0; n];
    let mut im = vec![0.0; n];
    for f in 0..frames {
        let start = f * cfg.hop;
        for i in 0..n {
            re[i] = samples[start + i].f64() * hann[i];
            im[i] = 0.0;
        }
        fft_in_place(&mut re, &mut im);
        for c in 0..channels {
            out.data[c * frames + f] = T::of(libm::hypot(re[c], im[c]));
        }
    }
    Ok(out)
}
