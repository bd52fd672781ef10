//! Frame encoder: frontend, four residual-skip WaveNet-style blocks (rSWC)
//! with stride-3 max pooling, and a bidirectional LSTM.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frontend::{spectrogram_frontend, SincCache, SincConfig, SincLayer, SpectrogramConfig};
use crate::params::{Init, ParamId, ParamLayout, ParamStore};
use crate::real::{axpy, dot, Real};
use crate::tensor::{FeatureSequence, Matrix};

pub const DILATIONS: [usize; 7] = [1, 2, 4, 8, 16, 32, 64];
pub const POOL: usize = 3;
pub const BLOCKS: usize = 4;
/// Overall temporal decimation of the block stack, `3^4`.
pub const DECIMATION: usize = 81;

/// 1-D convolution over a channel-major sequence with "same" zero padding.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub dilation: usize,
}

impl Conv1d {
    pub fn new(
        layout: &mut ParamLayout,
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        dilation: usize,
    ) -> Self {
        assert!(kernel % 2 == 1, "odd kernels only");
        let weight = layout.add(
            format!("{name}.weight"),
            &[out_channels, in_channels, kernel],
            Init::XavierUniform { fan_in: in_channels * kernel, fan_out: out_channels * kernel },
        );
        let bias = layout.add(format!("{name}.bias"), &[out_channels], Init::Zeros);
        Conv1d { weight, bias, in_channels, out_channels, kernel, dilation }
    }

    /// Time offset of tap `k` and the valid output range `[lo, hi)` for it.
    #[inline]
    fn tap_range(&self, k: usize, frames: usize) -> (isize, usize, usize) {
        let off = (k as isize - (self.kernel / 2) as isize) * self.dilation as isize;
        let lo = (-off).max(0) as usize;
        let hi = (frames as isize - off.max(0)).max(0) as usize;
        (off, lo.min(hi), hi)
    }

    pub fn forward<T: Real>(&self, store: &ParamStore<T>, x: &FeatureSequence<T>) -> FeatureSequence<T> {
        debug_assert_eq!(x.channels, self.in_channels);
        let w = &store[self.weight];
        let b = &store[self.bias];
        let t = x.frames;
        let mut y = FeatureSequence::zeros(self.out_channels, t, x.frame_rate);
        for o in 0..self.out_channels {
            let out = y.channel_mut(o);
            out.iter_mut().for_each(|v| *v = b[o]);
            for i in 0..self.in_channels {
                let xi = x.channel(i);
                for k in 0..self.kernel {
                    let (off, lo, hi) = self.tap_range(k, t);
                    if lo >= hi {
                        continue;
                    }
                    let wk = w[(o * self.in_channels + i) * self.kernel + k];
                    let src = (lo as isize + off) as usize;
                    axpy(wk, &xi[src..src + hi - lo], &mut out[lo..hi]);
                }
            }
        }
        y
    }

    /// Returns the input gradient and accumulates weight/bias gradients.
    pub fn backward<T: Real>(
        &self,
        store: &ParamStore<T>,
        x: &FeatureSequence<T>,
        gy: &FeatureSequence<T>,
        grads: &mut ParamStore<T>,
    ) -> FeatureSequence<T> {
        let w = &store[self.weight];
        let t = x.frames;
        let mut gx = FeatureSequence::zeros(self.in_channels, t, x.frame_rate);
        let mut gw = vec![T::zero(); w.len()];
        let mut gb = vec![T::zero(); self.out_channels];
        for o in 0..self.out_channels {
            let g = gy.channel(o);
            gb[o] = g.iter().copied().sum();
            for i in 0..self.in_channels {
                let xi = x.channel(i);
                for k in 0..self.kernel {
                    let (off, lo, hi) = self.tap_range(k, t);
                    if lo >= hi {
                        continue;
                    }
                    let idx = (o * self.in_channels + i) * self.kernel + k;
                    let src = (lo as isize + off) as usize;
                    gw[idx] = dot(&g[lo..hi], &xi[src..src + hi - lo]);
                    axpy(w[idx], &g[lo..hi], &mut gx.channel_mut(i)[src..src + hi - lo]);
                }
            }
        }
        accumulate(&mut grads[self.weight], &gw);
        accumulate(&mut grads[self.bias], &gb);
        gx
    }
}

fn accumulate<T: Real>(acc: &mut [T], g: &[T]) {
    for (a, &b) in acc.iter_mut().zip(g) {
        *a += b;
    }
}

/// Non-overlapping max pooling along time; trailing frames are dropped.
pub fn max_pool<T: Real>(x: &FeatureSequence<T>, size: usize) -> (FeatureSequence<T>, Vec<usize>) {
    let t_out = x.frames / size;
    let mut y = FeatureSequence::zeros(x.channels, t_out, x.frame_rate / size as f64);
    let mut argmax = vec![0usize; x.channels * t_out];
    for c in 0..x.channels {
        let xc = x.channel(c);
        for t in 0..t_out {
            let mut best = t * size;
            for j in t * size + 1..(t + 1) * size {
                if xc[j] > xc[best] {
                    best = j;
                }
            }
            y.data[c * t_out + t] = xc[best];
            argmax[c * t_out + t] = best;
        }
    }
    (y, argmax)
}

fn max_pool_backward<T: Real>(gy: &FeatureSequence<T>, argmax: &[usize], frames: usize, frame_rate: f64) -> FeatureSequence<T> {
    let mut gx = FeatureSequence::zeros(gy.channels, frames, frame_rate);
    for c in 0..gy.channels {
        for t in 0..gy.frames {
            gx.data[c * frames + argmax[c * gy.frames + t]] += gy.data[c * gy.frames + t];
        }
    }
    gx
}

/// One dilated layer: signal and gate convolutions feeding a gated tanh unit.
#[derive(Debug, Clone, PartialEq)]
pub struct GatedLayer {
    pub signal: Conv1d,
    pub gate: Conv1d,
}

/// Residual-skipped WaveNet convolution block.
#[derive(Debug, Clone, PartialEq)]
pub struct RswcBlock {
    pub channels: usize,
    pub layers: Vec<GatedLayer>,
    pub rconv: Conv1d,
}

#[derive(Debug, Clone)]
pub struct RswcCache<T> {
    inputs: Vec<FeatureSequence<T>>,
    tanh: Vec<FeatureSequence<T>>,
    sigm: Vec<FeatureSequence<T>>,
    skip: FeatureSequence<T>,
    rconv_out: FeatureSequence<T>,
    argmax: Vec<usize>,
}

impl RswcBlock {
    pub fn new(layout: &mut ParamLayout, name: &str, channels: usize, kernel: usize) -> Self {
        let layers = DILATIONS
            .iter()
            .enumerate()
            .map(|(i, &d)| GatedLayer {
                signal: Conv1d::new(layout, &format!("{name}.dconv{i}.signal"), channels, channels, kernel, d),
                gate: Conv1d::new(layout, &format!("{name}.dconv{i}.gate"), channels, channels, kernel, d),
            })
            .collect();
        let rconv = Conv1d::new(layout, &format!("{name}.rconv"), channels, channels, kernel, 1);
        RswcBlock { channels, layers, rconv }
    }

    pub fn forward<T: Real>(
        &self,
        store: &ParamStore<T>,
        x: &FeatureSequence<T>,
    ) -> Result<(FeatureSequence<T>, RswcCache<T>)> {
        if x.channels != self.channels {
            return Err(Error::WidthMismatch { expected: self.channels, got: x.channels });
        }
        if x.frames < POOL {
            return Err(Error::TooShort { got: x.frames, min: POOL });
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut tanh = Vec::with_capacity(self.layers.len());
        let mut sigm = Vec::with_capacity(self.layers.len());
        let mut skip = FeatureSequence::zeros(x.channels, x.frames, x.frame_rate);
        let mut cur = x.clone();
        for layer in &self.layers {
            let mut s = layer.signal.forward(store, &cur);
            let mut g = layer.gate.forward(store, &cur);
            s.data.iter_mut().for_each(|v| *v = v.tanh());
            g.data.iter_mut().for_each(|v| *v = v.sigmoid());
            let mut next = cur.clone();
            for ((n, sk), (&a, &b)) in next.data.iter_mut().zip(skip.data.iter_mut()).zip(s.data.iter().zip(&g.data)) {
                let h = a * b;
                *n += h;
                *sk += h;
            }
            inputs.push(core::mem::replace(&mut cur, next));
            tanh.push(s);
            sigm.push(g);
        }
        let rconv_out = self.rconv.forward(store, &skip);
        let mut relu = rconv_out.clone();
        relu.data.iter_mut().for_each(|v| *v = v.max(T::zero()));
        let (y, argmax) = max_pool(&relu, POOL);
        Ok((y, RswcCache { inputs, tanh, sigm, skip, rconv_out, argmax }))
    }

    pub fn backward<T: Real>(
        &self,
        store: &ParamStore<T>,
        cache: &RswcCache<T>,
        gy: &FeatureSequence<T>,
        grads: &mut ParamStore<T>,
    ) -> FeatureSequence<T> {
        let frames = cache.skip.frames;
        let rate = cache.skip.frame_rate;
        let mut g_relu = max_pool_backward(gy, &cache.argmax, frames, rate);
        for (g, &pre) in g_relu.data.iter_mut().zip(&cache.rconv_out.data) {
            if pre <= T::zero() {
                *g = T::zero();
            }
        }
        let g_skip = self.rconv.backward(store, &cache.skip, &g_relu, grads);
        // the residual stream after the last layer is not consumed
        let mut g_x = FeatureSequence::zeros(self.channels, frames, rate);
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let th = &cache.tanh[idx];
            let sg = &cache.sigm[idx];
            let mut g_sig = FeatureSequence::zeros(self.channels, frames, rate);
            let mut g_gate = FeatureSequence::zeros(self.channels, frames, rate);
            for j in 0..g_x.data.len() {
                let gh = g_x.data[j] + g_skip.data[j];
                let (a, b) = (th.data[j], sg.data[j]);
                g_sig.data[j] = gh * b * (T::one() - a * a);
                g_gate.data[j] = gh * a * b * (T::one() - b);
            }
            let input = &cache.inputs[idx];
            let gs = layer.signal.backward(store, input, &g_sig, grads);
            let gg = layer.gate.backward(store, input, &g_gate, grads);
            for ((gx, &a), &b) in g_x.data.iter_mut().zip(&gs.data).zip(&gg.data) {
                *gx += a + b;
            }
        }
        g_x
    }
}

/// One direction of an LSTM with gate order (input, forget, cell, output).
#[derive(Debug, Clone, PartialEq)]
pub struct LstmDirection {
    pub w_ih: ParamId,
    pub w_hh: ParamId,
    pub bias: ParamId,
    pub input: usize,
    pub hidden: usize,
}

#[derive(Debug, Clone)]
pub struct LstmCache<T> {
    /// Per step: activated gates `[i, f, g, o]`, each `hidden` wide.
    gates: Vec<Vec<T>>,
    cells: Vec<Vec<T>>,
    hiddens: Vec<Vec<T>>,
}

impl LstmDirection {
    fn new(layout: &mut ParamLayout, name: &str, input: usize, hidden: usize) -> Self {
        let w_ih = layout.add(
            format!("{name}.w_ih"),
            &[4 * hidden, input],
            Init::XavierUniform { fan_in: input, fan_out: 4 * hidden },
        );
        let w_hh = layout.add(
            format!("{name}.w_hh"),
            &[4 * hidden, hidden],
            Init::XavierUniform { fan_in: hidden, fan_out: 4 * hidden },
        );
        let bias = layout.add(format!("{name}.bias"), &[4 * hidden], Init::Zeros);
        LstmDirection { w_ih, w_hh, bias, input, hidden }
    }

    /// Runs over `x` rows in the given order, returning hidden states indexed
    /// by step (not by frame).
    fn forward<T: Real>(&self, store: &ParamStore<T>, x: &Matrix<T>, order: &[usize]) -> LstmCache<T> {
        let h = self.hidden;
        let w_ih = &store[self.w_ih];
        let w_hh = &store[self.w_hh];
        let b = &store[self.bias];
        let mut gates = Vec::with_capacity(order.len());
        let mut cells = Vec::with_capacity(order.len());
        let mut hiddens = Vec::with_capacity(order.len());
        let mut h_prev = vec![T::zero(); h];
        let mut c_prev = vec![T::zero(); h];
        for &t in order {
            let xt = x.row(t);
            let mut z: Vec<T> = (0..4 * h)
                .map(|r| {
                    b[r] + dot(&w_ih[r * self.input..(r + 1) * self.input], xt)
                        + dot(&w_hh[r * h..(r + 1) * h], &h_prev)
                })
                .collect();
            for (r, v) in z.iter_mut().enumerate() {
                *v = if (2 * h..3 * h).contains(&r) { v.tanh() } else { v.sigmoid() };
            }
            let mut c = vec![T::zero(); h];
            let mut hn = vec![T::zero(); h];
            for j in 0..h {
                c[j] = z[h + j] * c_prev[j] + z[j] * z[2 * h + j];
                hn[j] = z[3 * h + j] * c[j].tanh();
            }
            gates.push(z);
            c_prev.clone_from(&c);
            h_prev.clone_from(&hn);
            cells.push(c);
            hiddens.push(hn);
        }
        LstmCache { gates, cells, hiddens }
    }

    /// Backpropagation through time. `g_h[s]` is the loss gradient on the
    /// hidden output of step `s`; the input gradient is added to `g_x`.
    fn backward<T: Real>(
        &self,
        store: &ParamStore<T>,
        x: &Matrix<T>,
        order: &[usize],
        cache: &LstmCache<T>,
        g_h: &[Vec<T>],
        g_x: &mut Matrix<T>,
        grads: &mut ParamStore<T>,
    ) {
        let h = self.hidden;
        let w_ih = &store[self.w_ih];
        let w_hh = &store[self.w_hh];
        let mut gw_ih = vec![T::zero(); w_ih.len()];
        let mut gw_hh = vec![T::zero(); w_hh.len()];
        let mut gb = vec![T::zero(); 4 * h];
        let mut dh_next = vec![T::zero(); h];
        let mut dc_next = vec![T::zero(); h];
        let zeros = vec![T::zero(); h];
        let mut dz = vec![T::zero(); 4 * h];
        for s in (0..order.len()).rev() {
            let z = &cache.gates[s];
            let c = &cache.cells[s];
            let c_prev = if s > 0 { &cache.cells[s - 1] } else { &zeros };
            let h_prev = if s > 0 { &cache.hiddens[s - 1] } else { &zeros };
            for j in 0..h {
                let dh = g_h[s][j] + dh_next[j];
                let (i, f, g, o) = (z[j], z[h + j], z[2 * h + j], z[3 * h + j]);
                let tc = c[j].tanh();
                let dc = dc_next[j] + dh * o * (T::one() - tc * tc);
                dz[j] = dc * g * i * (T::one() - i);
                dz[h + j] = dc * c_prev[j] * f * (T::one() - f);
                dz[2 * h + j] = dc * i * (T::one() - g * g);
                dz[3 * h + j] = dh * tc * o * (T::one() - o);
                dc_next[j] = dc * f;
            }
            let xt = x.row(order[s]);
            dh_next.iter_mut().for_each(|v| *v = T::zero());
            let gxt = g_x.row_mut(order[s]);
            for r in 0..4 * h {
                let d = dz[r];
                gb[r] += d;
                axpy(d, xt, &mut gw_ih[r * self.input..(r + 1) * self.input]);
                axpy(d, h_prev, &mut gw_hh[r * h..(r + 1) * h]);
                axpy(d, &w_ih[r * self.input..(r + 1) * self.input], gxt);
                axpy(d, &w_hh[r * h..(r + 1) * h], &mut dh_next);
            }
        }
        accumulate(&mut grads[self.w_ih], &gw_ih);
        accumulate(&mut grads[self.w_hh], &gw_hh);
        accumulate(&mut grads[self.bias], &gb);
    }
}

/// Single-layer bidirectional LSTM; output rows are `[forward | backward]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiLstm {
    pub forward_dir: LstmDirection,
    pub backward_dir: LstmDirection,
}

#[derive(Debug, Clone)]
pub struct BiLstmCache<T> {
    input: Matrix<T>,
    fwd: LstmCache<T>,
    bwd: LstmCache<T>,
}

impl BiLstm {
    pub fn new(layout: &mut ParamLayout, name: &str, input: usize, hidden: usize) -> Self {
        BiLstm {
            forward_dir: LstmDirection::new(layout, &format!("{name}.forward"), input, hidden),
            backward_dir: LstmDirection::new(layout, &format!("{name}.backward"), input, hidden),
        }
    }

    pub fn output_width(&self) -> usize {
        2 * self.forward_dir.hidden
    }

    pub fn forward<T: Real>(&self, store: &ParamStore<T>, x: Matrix<T>) -> (Matrix<T>, BiLstmCache<T>) {
        let steps = x.rows;
        let fwd_order: Vec<usize> = (0..steps).collect();
        let bwd_order: Vec<usize> = (0..steps).rev().collect();
        let fwd = self.forward_dir.forward(store, &x, &fwd_order);
        let bwd = self.backward_dir.forward(store, &x, &bwd_order);
        let h = self.forward_dir.hidden;
        let mut out = Matrix::zeros(steps, 2 * h);
        for t in 0..steps {
            let row = out.row_mut(t);
            row[..h].copy_from_slice(&fwd.hiddens[t]);
            row[h..].copy_from_slice(&bwd.hiddens[steps - 1 - t]);
        }
        (out, BiLstmCache { input: x, fwd, bwd })
    }

    pub fn backward<T: Real>(
        &self,
        store: &ParamStore<T>,
        cache: &BiLstmCache<T>,
        g_out: &Matrix<T>,
        grads: &mut ParamStore<T>,
    ) -> Matrix<T> {
        let steps = g_out.rows;
        let h = self.forward_dir.hidden;
        let fwd_order: Vec<usize> = (0..steps).collect();
        let bwd_order: Vec<usize> = (0..steps).rev().collect();
        let g_fwd: Vec<Vec<T>> = (0..steps).map(|t| g_out.row(t)[..h].to_vec()).collect();
        let g_bwd: Vec<Vec<T>> = (0..steps).map(|s| g_out.row(steps - 1 - s)[h..].to_vec()).collect();
        let mut g_x = Matrix::zeros(steps, cache.input.cols);
        self.forward_dir.backward(store, &cache.input, &fwd_order, &cache.fwd, &g_fwd, &mut g_x, grads);
        self.backward_dir.backward(store, &cache.input, &bwd_order, &cache.bwd, &g_bwd, &mut g_x, grads);
        g_x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrontendKind {
    Sinc,
    Spectrogram,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Frontend {
    Sinc(SincLayer),
    Spectrogram(SpectrogramConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub frontend: FrontendKind,
    pub sinc: SincConfig,
    pub spectrogram: SpectrogramConfig,
    /// Width of every rSWC block.
    pub channels: usize,
    pub kernel: usize,
    /// LSTM units per direction.
    pub rnn_hidden: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            frontend: FrontendKind::Sinc,
            sinc: SincConfig::default(),
            spectrogram: SpectrogramConfig::default(),
            channels: 64,
            kernel: 3,
            rnn_hidden: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    pub config: EncoderConfig,
    pub frontend: Frontend,
    /// 1x1 projection, present when the frontend width differs from `channels`.
    pub projection: Option<Conv1d>,
    pub blocks: Vec<RswcBlock>,
    pub rnn: BiLstm,
}

#[derive(Debug, Clone)]
pub struct EncoderCache<T> {
    sinc: Option<SincCache<T>>,
    features: FeatureSequence<T>,
    block_caches: Vec<RswcCache<T>>,
    rnn: BiLstmCache<T>,
    pooled_rate: f64,
}

impl Encoder {
    pub fn new(config: EncoderConfig, layout: &mut ParamLayout) -> Self {
        let (frontend, width) = match config.frontend {
            FrontendKind::Sinc => (Frontend::Sinc(SincLayer::new(config.sinc, layout, "frontend.sinc")), config.sinc.filters),
            FrontendKind::Spectrogram => (Frontend::Spectrogram(config.spectrogram), config.spectrogram.channels()),
        };
        let projection = (width != config.channels)
            .then(|| Conv1d::new(layout, "encoder.projection", width, config.channels, 1, 1));
        let blocks = (0..BLOCKS)
            .map(|i| RswcBlock::new(layout, &format!("encoder.rswc{i}"), config.channels, config.kernel))
            .collect();
        let rnn = BiLstm::new(layout, "encoder.blstm", config.channels, config.rnn_hidden);
        Encoder { config, frontend, projection, blocks, rnn }
    }

    pub fn output_width(&self) -> usize {
        self.rnn.output_width()
    }

    /// Fewest waveform samples the encoder accepts.
    pub fn min_samples(&self) -> usize {
        match &self.frontend {
            Frontend::Sinc(layer) => layer.config.filter_length.max(DECIMATION),
            Frontend::Spectrogram(cfg) => cfg.samples_for(DECIMATION),
        }
    }

    /// Output frame count for an input of `samples` samples.
    pub fn frames_for(&self, samples: usize) -> usize {
        let mut t = match &self.frontend {
            Frontend::Sinc(_) => samples,
            Frontend::Spectrogram(cfg) => cfg.frames_for(samples),
        };
        for _ in 0..BLOCKS {
            t /= POOL;
        }
        t
    }

    pub fn forward<T: Real>(&self, store: &ParamStore<T>, samples: &[T]) -> Result<(Matrix<T>, EncoderCache<T>)> {
        let min = self.min_samples();
        if samples.len() < min {
            return Err(Error::TooShort { got: samples.len(), min });
        }
        let (features, sinc) = match &self.frontend {
            Frontend::Sinc(layer) => {
                let (f, c) = layer.forward(store, samples)?;
                (f, Some(c))
            }
            Frontend::Spectrogram(cfg) => (spectrogram_frontend(samples, cfg)?, None),
        };
        let mut x = match &self.projection {
            Some(p) => p.forward(store, &features),
            None => features.clone(),
        };
        let mut block_caches = Vec::with_capacity(BLOCKS);
        for block in &self.blocks {
            let (y, cache) = block.forward(store, &x)?;
            x = y;
            block_caches.push(cache);
        }
        let pooled_rate = x.frame_rate;
        let (out, rnn) = self.rnn.forward(store, x.to_frames());
        Ok((out, EncoderCache { sinc, features, block_caches, rnn, pooled_rate }))
    }

    pub fn backward<T: Real>(
        &self,
        store: &ParamStore<T>,
        cache: &EncoderCache<T>,
        g_out: &Matrix<T>,
        grads: &mut ParamStore<T>,
    ) {
        let g_seq = self.rnn.backward(store, &cache.rnn, g_out, grads);
        let mut g = FeatureSequence::from_frames(&g_seq, cache.pooled_rate);
        for (i, block) in self.blocks.iter().enumerate().rev() {
            g = block.backward(store, &cache.block_caches[i], &g, grads);
        }
        if let Some(p) = &self.projection {
            g = p.backward(store, &cache.features, &g, grads);
        }
        if let (Frontend::Sinc(layer), Some(sc)) = (&self.frontend, &cache.sinc) {
            layer.backward(store, sc, &g, grads);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pool_shape_arithmetic() {
        let x = FeatureSequence::<f32>::zeros(2, 16_000, 16_000.0);
        assert_eq!(max_pool(&x, 3).0.frames, 5333);
        let x = FeatureSequence::<f32>::zeros(2, 9, 16_000.0);
        assert_eq!(max_pool(&x, 3).0.frames, 3);
    }

    #[test]
    fn zero_input_gives_zero_block_output() {
        let mut layout = ParamLayout::new();
        let block = RswcBlock::new(&mut layout, "b", 4, 3);
        let store = ParamStore::<f64>::init(&layout, 1);
        let x = FeatureSequence::zeros(4, 30, 1.0);
        let (y, _) = block.forward(&store, &x).unwrap();
        assert_eq!(y.frames, 10);
        assert!(y.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn block_rejects_short_or_wrong_width() {
        let mut layout = ParamLayout::new();
        let block = RswcBlock::new(&mut layout, "b", 4, 3);
        let store = ParamStore::<f64>::init(&layout, 1);
        assert!(matches!(
            block.forward(&store, &FeatureSequence::zeros(4, 2, 1.0)),
            Err(Error::TooShort { .. })
        ));
        assert!(matches!(
            block.forward(&store, &FeatureSequence::zeros(3, 9, 1.0)),
            Err(Error::WidthMismatch { .. })
        ));
    }

    #[test]
    fn zeroed_gates_make_block_output_input_independent() {
        let mut layout = ParamLayout::new();
        let block = RswcBlock::new(&mut layout, "b", 4, 3);
        let mut store = ParamStore::<f64>::init(&layout, 5);
        for layer in &block.layers {
            for conv in [&layer.signal, &layer.gate] {
                store[conv.weight].iter_mut().for_each(|w| *w = 0.0);
            }
        }
        store[block.rconv.bias].copy_from_slice(&[0.5, -0.5, 0.25, 1.0]);
        let mut rng = crate::rng::Rng::new(9);
        let mut x = FeatureSequence::zeros(4, 12, 1.0);
        x.data.iter_mut().for_each(|v| *v = rng.normal());
        let (y, _) = block.forward(&store, &x).unwrap();
        // maxpool(relu(conv(0))) = relu(bias)
        for (c, expect) in [0.5, 0.0, 0.25, 1.0].into_iter().enumerate() {
            assert!(y.channel(c).iter().all(|&v| v == expect));
        }
    }

    #[test]
    fn conv_identity_kernel_copies_input() {
        let mut layout = ParamLayout::new();
        let conv = Conv1d::new(&mut layout, "c", 1, 1, 3, 2);
        let mut store = ParamStore::<f64>::init(&layout, 0);
        store[conv.weight].copy_from_slice(&[0.0, 1.0, 0.0]);
        let x = FeatureSequence { channels: 1, frames: 5, frame_rate: 1.0, data: vec![1.0, 2.0, 3.0, 4.0, 5.0] };
        assert_eq!(conv.forward(&store, &x).data, x.data);
        store[conv.weight].copy_from_slice(&[1.0, 0.0, 0.0]);
        // tap 0 reads t - 2
        assert_eq!(conv.forward(&store, &x).data, vec![0.0, 0.0, 1.0, 2.0, 3.0]);
    }
}
