//! Distance and prediction modules, final-score averaging, and the x-vector
//! baseline and fusion helpers.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::attention::softmax_in_place;
use crate::error::{invalid, Error, Result};
use crate::params::{Init, ParamId, ParamLayout, ParamStore};
use crate::real::{axpy, dot, Real};
use crate::tensor::Matrix;

pub const CLASSES: usize = 4;

/// Arithmetic mean over frames.
pub fn mean_pool<T: Real>(r: &Matrix<T>) -> Result<Vec<T>> {
    if r.rows == 0 {
        return Err(Error::Empty("cannot average an empty sequence"));
    }
    let mut acc = vec![T::zero(); r.cols];
    for t in 0..r.rows {
        for (a, &x) in acc.iter_mut().zip(r.row(t)) {
            *a += x;
        }
    }
    let inv = T::one() / T::of(r.rows as f64);
    acc.iter_mut().for_each(|a| *a *= inv);
    Ok(acc)
}

/// Per-dimension absolute difference `|a_i - b_i|`.
pub fn distance<T: Real>(a: &[T], b: &[T]) -> Result<Vec<T>> {
    if a.len() != b.len() {
        return Err(Error::WidthMismatch { expected: a.len(), got: b.len() });
    }
    Ok(a.iter().zip(b).map(|(&x, &y)| (x - y).abs()).collect())
}

/// Appends `|e_test - e_ref|` to a distance vector.
pub fn feature_fusion_extend<T: Real>(d: &[T], e_test: &[T], e_ref: &[T]) -> Result<Vec<T>> {
    let extra = distance(e_test, e_ref)?;
    let mut out = Vec::with_capacity(d.len() + extra.len());
    out.extend_from_slice(d);
    out.extend(extra);
    Ok(out)
}

/// Cosine similarity mapped affinely from `[-1, 1]` onto `[1, 4]`.
pub fn xvector_cosine_score(e1: &[f64], e2: &[f64]) -> Result<f64> {
    if e1.len() != e2.len() {
        return Err(Error::WidthMismatch { expected: e1.len(), got: e2.len() });
    }
    let n1 = libm::sqrt(dot(e1, e1));
    let n2 = libm::sqrt(dot(e2, e2));
    if n1 == 0.0 || n2 == 0.0 {
        return Err(invalid("cosine similarity of a zero vector"));
    }
    let cos = (dot(e1, e2) / (n1 * n2)).clamp(-1.0, 1.0);
    Ok(1.0 + 3.0 * (cos + 1.0) / 2.0)
}

/// Default network share in score fusion (network : x-vector = 3 : 7).
pub const DEFAULT_FUSION_WEIGHT: f64 = 0.3;

/// Weighted average `w * s_svs + (1 - w) * s_xv`.
pub fn score_fusion(s_svs: f64, s_xv: f64, weight: f64) -> f64 {
    weight * s_svs + (1.0 - weight) * s_xv
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    /// One node, identity activation, trained with MSE.
    #[default]
    Regression,
    /// Four nodes, softmax activation, trained with cross entropy.
    Classification,
}

impl OutputKind {
    pub fn nodes(self) -> usize {
        match self {
            OutputKind::Regression => 1,
            OutputKind::Classification => CLASSES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Score {
    Regression(f64),
    Classification([f64; CLASSES]),
}

impl Score {
    /// Predicted rating on the 1..=4 scale: the raw value for regression,
    /// the argmax label (ties toward the lower label) for classification.
    pub fn value(&self) -> f64 {
        match self {
            Score::Regression(v) => *v,
            Score::Classification(_) => self.label().expect("classification") as f64,
        }
    }

    pub fn label(&self) -> Option<u8> {
        match self {
            Score::Regression(_) => None,
            Score::Classification(p) => {
                let mut best = 0;
                for (i, &x) in p.iter().enumerate() {
                    if x > p[best] {
                        best = i;
                    }
                }
                Some(best as u8 + 1)
            }
        }
    }

    /// Probability-weighted rating `sum_i p_i * i`.
    pub fn expected(&self) -> f64 {
        match self {
            Score::Regression(v) => *v,
            Score::Classification(p) => p.iter().enumerate().map(|(i, &x)| (i + 1) as f64 * x).sum(),
        }
    }

    pub fn from_outputs<T: Real>(kind: OutputKind, raw: &[T]) -> Self {
        match kind {
            OutputKind::Regression => Score::Regression(raw[0].f64()),
            OutputKind::Classification => {
                let mut p: Vec<f64> = raw.iter().map(|x| x.f64()).collect();
                softmax_in_place(&mut p);
                Score::Classification([p[0], p[1], p[2], p[3]])
            }
        }
    }
}

/// Averages the two directional scores; classification averages probabilities.
pub fn final_score(s_test: &Score, s_ref: &Score) -> Result<Score> {
    match (s_test, s_ref) {
        (Score::Regression(a), Score::Regression(b)) => Ok(Score::Regression((a + b) / 2.0)),
        (Score::Classification(a), Score::Classification(b)) => {
            let mut p = [0.0; CLASSES];
            for i in 0..CLASSES {
                p[i] = (a[i] + b[i]) / 2.0;
            }
            Ok(Score::Classification(p))
        }
        _ => Err(invalid("cannot average regression and classification scores")),
    }
}

/// Affine map `out x in` with bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub input: usize,
    pub output: usize,
}

impl Linear {
    pub fn new(layout: &mut ParamLayout, name: &str, input: usize, output: usize) -> Self {
        let weight = layout.add(
            format!("{name}.weight"),
            &[output, input],
            Init::XavierUniform { fan_in: input, fan_out: output },
        );
        let bias = layout.add(format!("{name}.bias"), &[output], Init::Zeros);
        Linear { weight, bias, input, output }
    }

    pub fn forward<T: Real>(&self, store: &ParamStore<T>, x: &[T]) -> Vec<T> {
        let w = &store[self.weight];
        let b = &store[self.bias];
        (0..self.output).map(|o| b[o] + dot(&w[o * self.input..(o + 1) * self.input], x)).collect()
    }

    pub fn backward<T: Real>(&self, store: &ParamStore<T>, x: &[T], gy: &[T], grads: &mut ParamStore<T>) -> Vec<T> {
        let w = &store[self.weight];
        let mut gx = vec![T::zero(); self.input];
        for (o, &g) in gy.iter().enumerate() {
            axpy(g, &w[o * self.input..(o + 1) * self.input], &mut gx);
            axpy(g, x, &mut grads[self.weight][o * self.input..(o + 1) * self.input]);
            grads[self.bias][o] += g;
        }
        gx
    }
}

/// `sigma(lin2(relu(lin1(d))))`; `forward` returns the pre-activation
/// outputs (the regression value or the class logits).
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionHead {
    pub kind: OutputKind,
    pub lin1: Linear,
    pub lin2: Linear,
}

#[derive(Debug, Clone)]
pub struct HeadCache<T> {
    input: Vec<T>,
    hidden_pre: Vec<T>,
    hidden: Vec<T>,
}

impl PredictionHead {
    pub fn new(layout: &mut ParamLayout, name: &str, input: usize, hidden: usize, kind: OutputKind) -> Self {
        PredictionHead {
            kind,
            lin1: Linear::new(layout, &format!("{name}.lin1"), input, hidden),
            lin2: Linear::new(layout, &format!("{name}.lin2"), hidden, kind.nodes()),
        }
    }

    pub fn input_width(&self) -> usize {
        self.lin1.input
    }

    pub fn forward<T: Real>(&self, store: &ParamStore<T>, d: &[T]) -> Result<(Vec<T>, HeadCache<T>)> {
        if d.len() != self.lin1.input {
            return Err(Error::WidthMismatch { expected: self.lin1.input, got: d.len() });
        }
        let hidden_pre = self.lin1.forward(store, d);
        let hidden: Vec<T> = hidden_pre.iter().map(|&x| x.max(T::zero())).collect();
        let out = self.lin2.forward(store, &hidden);
        Ok((out, HeadCache { input: d.to_vec(), hidden_pre, hidden }))
    }

    pub fn predict<T: Real>(&self, store: &ParamStore<T>, d: &[T]) -> Result<Score> {
        let (raw, _) = self.forward(store, d)?;
        Ok(Score::from_outputs(self.kind, &raw))
    }

    /// Gradient with respect to the distance vector.
    pub fn backward<T: Real>(
        &self,
        store: &ParamStore<T>,
        cache: &HeadCache<T>,
        g_out: &[T],
        grads: &mut ParamStore<T>,
    ) -> Vec<T> {
        let mut g_hidden = self.lin2.backward(store, &cache.hidden, g_out, grads);
        for (g, &pre) in g_hidden.iter_mut().zip(&cache.hidden_pre) {
            if pre <= T::zero() {
                *g = T::zero();
            }
        }
        self.lin1.backward(store, &cache.input, &g_hidden, grads)
    }
}

/// Precomputed speaker embedding consumed from an external file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalEmbedding {
    pub utterance_id: String,
    pub vector: Vec<f64>,
}
