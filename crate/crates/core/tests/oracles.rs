//! Signal-path properties checked against an independent FFT.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use svsnet_core::frontend::{sinc_impulse_response, SincConfig, SincFilterbank};
use svsnet_core::rng::Rng;
use svsnet_core::signal::resample;
use svsnet_core::synth::{gen_speaker, gen_utterance};
use svsnet_core::Waveform;

fn spectrum(x: &[f64], n: usize) -> Vec<f64> {
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    buf.resize(n, Complex::new(0.0, 0.0));
    fft.process(&mut buf);
    buf[..=n / 2].iter().map(|c| c.norm()).collect()
}

fn hann(x: &[f32]) -> Vec<f64> {
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, &v)| v as f64 * 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / n).cos()))
        .collect()
}

fn argmax_in(mag: &[f64], lo: usize, hi: usize) -> usize {
    (lo..hi).max_by(|&a, &b| mag[a].total_cmp(&mag[b])).unwrap()
}

fn tone(freq: f64, rate: u32, secs: f64) -> Waveform {
    let n = (rate as f64 * secs) as usize;
    let s = (0..n).map(|i| (2.0 * std::f64::consts::PI * freq * i as f64 / rate as f64).sin() as f32 * 0.5).collect();
    Waveform::new(s, rate, "tone").unwrap()
}

#[test]
fn upsampled_tone_keeps_its_frequency() {
    let out = resample(&tone(440.0, 8_000, 2.0), 16_000).unwrap();
    assert_eq!(out.len(), 32_000);
    let n = 1 << 18;
    let mag = spectrum(&hann(&out.samples), n);
    let peak = argmax_in(&mag, 1, mag.len()) as f64 * 16_000.0 / n as f64;
    assert!((peak - 440.0).abs() <= 2.0, "peak at {peak} Hz");
}

#[test]
fn passband_tones_keep_their_level() {
    for freq in [200.0, 1000.0, 3000.0, 6000.0, 7000.0] {
        let out = resample(&tone(freq, 22_050, 1.0), 16_000).unwrap();
        // skip the filter's edge transients
        let mid = &out.samples[2000..out.len() - 2000];
        let rms = (mid.iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / mid.len() as f64).sqrt();
        let db = 20.0 * (rms / (0.5 / 2f64.sqrt())).log10();
        assert!(db.abs() < 0.1, "{freq} Hz changed by {db:.3} dB");
    }
}

#[test]
fn content_above_the_new_nyquist_is_rejected() {
    // white noise restricted to 8..11.025 kHz
    let n = 1 << 16;
    let mut rng = Rng::new(3);
    let mut buf: Vec<Complex<f64>> = (0..n).map(|_| Complex::new(rng.normal(), 0.0)).collect();
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(n).process(&mut buf);
    for (i, c) in buf.iter_mut().enumerate() {
        let f = i.min(n - i) as f64 * 22_050.0 / n as f64;
        if f < 8_000.0 {
            *c = Complex::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let input: Vec<f32> = buf.iter().map(|c| (c.re / n as f64) as f32).collect();
    let in_power = input.iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / input.len() as f64;
    let out = resample(&Waveform::new(input, 22_050, "noise").unwrap(), 16_000).unwrap();
    let out_power = out.samples.iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / out.len() as f64;
    let attenuation = 10.0 * (in_power / out_power).log10();
    assert!(attenuation >= 40.0, "only {attenuation:.1} dB");
}

#[test]
fn sinc_filters_peak_inside_their_band() {
    let mut rng = Rng::new(12);
    let n = 1 << 15;
    for _ in 0..50 {
        let f1 = rng.range(250.0, 7700.0);
        let f2 = rng.range(f1 + 50.0, 7850.0);
        let mag = spectrum(&sinc_impulse_response(f1, f2, 16_000.0, 251), n);
        let peak = argmax_in(&mag, 0, mag.len());
        let freq = peak as f64 * 16_000.0 / n as f64;
        assert!((f1..=f2).contains(&freq), "[{f1}, {f2}] peaks at {freq}");
        assert!(mag[0] < 0.01 * mag[peak]);
    }
}

#[test]
fn filterbank_passes_in_band_tones_and_blocks_others() {
    let fb = SincFilterbank::new(SincConfig { filters: 8, ..Default::default() });
    let edges = fb.band_edges();
    let k = 5;
    let (f1, f2) = edges[k];
    let centre = tone((f1 + f2) / 2.0, 16_000, 0.5);
    let far = tone(if f1 > 4000.0 { 500.0 } else { 7000.0 }, 16_000, 0.5);
    let rms_of = |w: &Waveform| {
        let y = fb.apply(&w.samples).unwrap();
        let ch = &y.channel(k)[500..y.frames - 500];
        (ch.iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / ch.len() as f64).sqrt()
    };
    let input_rms = 0.5 / 2f64.sqrt();
    let pass = rms_of(&centre) / input_rms;
    let stop = rms_of(&far) / input_rms;
    assert!((pass - 1.0).abs() < 0.05, "in-band gain {pass}");
    assert!(stop < 0.01, "out-of-band gain {stop}");
}

#[test]
fn synthetic_voice_has_its_fundamental() {
    for seed in 0..6 {
        let sp = gen_speaker(seed);
        let w = gen_utterance(&sp, 2.0, 1).unwrap();
        let n = 1 << 17;
        let mag = spectrum(&hann(&w.samples), n);
        let hz = |bin: usize| bin as f64 * 16_000.0 / n as f64;
        let bin = |f: f64| (f * n as f64 / 16_000.0) as usize;
        let peak = hz(argmax_in(&mag, bin(0.5 * sp.f0), bin(1.5 * sp.f0)));
        assert!((peak - sp.f0).abs() <= 5.0, "f0 {} but peak at {peak}", sp.f0);
    }
}
