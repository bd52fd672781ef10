//! Waveforms, band-limited rate conversion and a small FFT.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Sample rate every model input is converted to.
pub const MODEL_SAMPLE_RATE: u32 = 16_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
    pub source_id: String,
}

impl Waveform {
    pub fn new(samples: Vec<f32>, sample_rate: u32, source_id: impl Into<String>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Empty("waveform has no samples"));
        }
        if sample_rate == 0 {
            return Err(invalid("sample rate must be positive"));
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(invalid("waveform contains non-finite samples"));
        }
        Ok(Waveform { samples, sample_rate, source_id: source_id.into() })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Scales so that `max |x| == 1`; silence is returned untouched.
    pub fn peak_normalized(mut self) -> Self {
        let peak = self.samples.iter().fold(0.0f32, |m, x| m.max(x.abs()));
        if peak > 0.0 {
            let inv = 1.0 / peak;
            self.samples.iter_mut().for_each(|x| *x *= inv);
        }
        self
    }
}

/// Averages interleaved frames of `channels` samples down to mono.
pub fn mixdown(interleaved: &[f32], channels: usize) -> Vec<f32> {
    assert!(channels >= 1);
    if channels == 1 {
        return interleaved.to_vec();
    }
    let scale = 1.0 / channels as f32;
    interleaved
        .chunks_exact(channels)
        .map(|frame| frame.iter().sum::<f32>() * scale)
        .collect()
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Zeroth-order modified Bessel function of the first kind.
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    let mut k = 1.0;
    while term > 1e-17 * sum {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

fn sinc_pi(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        libm::sin(PI * x) / (PI * x)
    }
}

/// Kaiser-windowed sinc low-pass used by [`resample`].
///
/// The cutoff sits at 95% of the lower Nyquist frequency and the transition
/// band spans 90%..100% of it, so the stopband starts exactly at the lower
/// Nyquist frequency. Designed for 80 dB stopband attenuation.
#[derive(Debug, Clone)]
struct ResampleKernel {
    up: u64,
    down: u64,
    half: i64,
    cutoff: f64,
    beta: f64,
    table: Option<Vec<f64>>,
}

const STOPBAND_DB: f64 = 80.0;
const MAX_TABLE_PHASES: u64 = 4096;

impl ResampleKernel {
    fn new(source: u32, target: u32) -> Self {
        let g = gcd(source as u64, target as u64);
        let up = target as u64 / g;
        let down = source as u64 / g;
        let nyq = source.min(target) as f64 / 2.0;
        // normalised to the input sample rate
        let cutoff = 0.95 * nyq / source as f64;
        let transition = 2.0 * PI * 0.1 * nyq / source as f64;
        let taps = (STOPBAND_DB - 7.95) / (2.285 * transition);
        let half = libm::ceil(taps / 2.0) as i64 + 1;
        let beta = 0.1102 * (STOPBAND_DB - 8.7);
        let mut kernel = ResampleKernel { up, down, half, cutoff, beta, table: None };
        if up <= MAX_TABLE_PHASES {
            let mut table = Vec::with_capacity(up as usize * 2 * half as usize);
            for phase in 0..up {
                for tap in 0..2 * half {
                    table.push(kernel.weight(phase, tap));
                }
            }
            kernel.table = Some(table);
        }
        kernel
    }

    /// Weight of input sample `n0 - half + 1 + tap` for an output whose
    /// position is `n0 + phase / up`.
    fn weight(&self, phase: u64, tap: i64) -> f64 {
        let offset = (self.half - 1 - tap) as f64 + phase as f64 / self.up as f64;
        let x = offset / self.half as f64;
        if x.abs() >= 1.0 {
            return 0.0;
        }
        let window = bessel_i0(self.beta * libm::sqrt(1.0 - x * x)) / bessel_i0(self.beta);
        2.0 * self.cutoff * sinc_pi(2.0 * self.cutoff * offset) * window
    }
}

/// Number of output samples [`resample`] produces: `round(len * target / source)`.
pub fn resampled_len(len: usize, source: u32, target: u32) -> usize {
    ((len as u64 * target as u64 + source as u64 / 2) / source as u64) as usize
}

/// Band-limited rational-ratio rate conversion (windowed-sinc polyphase).
pub fn resample(w: &Waveform, target_rate: u32) -> Result<Waveform> {
    if target_rate == 0 {
        return Err(invalid("target sample rate must be positive"));
    }
    if w.sample_rate == 0 {
        return Err(invalid("source sample rate must be positive"));
    }
    if target_rate == w.sample_rate {
        return Ok(w.clone());
    }
    let kernel = ResampleKernel::new(w.sample_rate, target_rate);
    let n_out = resampled_len(w.samples.len(), w.sample_rate, target_rate);
    let input = &w.samples;
    let n_in = input.len() as i64;
    let taps = 2 * kernel.half;
    let mut out = Vec::with_capacity(n_out);
    for j in 0..n_out as u64 {
        let pos = j * kernel.down;
        let n0 = (pos / kernel.up) as i64;
        let phase = pos % kernel.up;
        let first = n0 - kernel.half + 1;
        let mut acc = 0.0f64;
        for tap in 0..taps {
            let n = first + tap;
            if n < 0 || n >= n_in {
                continue;
            }
            let weight = match &kernel.table {
                Some(t) => t[(phase * taps as u64 + tap as u64) as usize],
                None => kernel.weight(phase, tap),
            };
            acc += weight * input[n as usize] as f64;
        }
        out.push(acc as f32);
    }
    Ok(Waveform { samples: out, sample_rate: target_rate, source_id: w.source_id.clone() })
}

/// In-place iterative radix-2 FFT over `(re, im)` pairs; `len` must be a power of two.
pub fn fft_in_place(re: &mut [f64], im: &mut [f64]) {
    let n = re.len();
    assert_eq!(n, im.len());
    assert!(n.is_power_of_two(), "fft length must be a power of two");
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            re.swap(i, j);
            im.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let ang = -2.0 * PI / len as f64;
        for start in (0..n).step_by(len) {
            for k in 0..len / 2 {
                let (s, c) = libm::sincos(ang * k as f64);
                let a = start + k;
                let b = a + len / 2;
                let tr = re[b] * c - im[b] * s;
                let ti = re[b] * s + im[b] * c;
                re[b] = re[a] - tr;
                im[b] = im[a] - ti;
                re[a] += tr;
                im[a] += ti;
            }
        }
        len <<= 1;
    }
}

/// Magnitudes of the non-negative-frequency bins of a real frame.
pub fn magnitude_spectrum(frame: &[f64]) -> Vec<f64> {
    let mut re = frame.to_vec();
    let mut im = vec![0.0; frame.len()];
    fft_in_place(&mut re, &mut im);
    (0..=frame.len() / 2).map(|k| libm::hypot(re[k], im[k])).collect()
}
