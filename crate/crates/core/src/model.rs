//! The full pair model: shared encoder, (co-)attention, distances and the
//! prediction head.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::attention::{attention_backward, co_attend, AttentionMode, Attended};
use crate::encoder::{Encoder, EncoderCache, EncoderConfig};
use crate::error::{Error, Result};
use crate::head::{distance, feature_fusion_extend, final_score, mean_pool, HeadCache, OutputKind, PredictionHead, Score};
use crate::params::{ParamLayout, ParamStore};
use crate::real::Real;
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub encoder: EncoderConfig,
    pub attention: AttentionMode,
    pub output: OutputKind,
    pub head_hidden: usize,
    /// Width of external embeddings appended to the distance vector; 0 disables
    /// feature fusion.
    pub fusion_dim: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            encoder: EncoderConfig::default(),
            attention: AttentionMode::CoAttention,
            output: OutputKind::Regression,
            head_hidden: 128,
            fusion_dim: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Svsnet {
    pub config: ModelConfig,
    pub encoder: Encoder,
    pub head: PredictionHead,
}

/// One test/reference pair, optionally with external embeddings for feature fusion.
#[derive(Debug, Clone, Copy)]
pub struct PairInput<'a, T> {
    pub test: &'a [T],
    pub reference: &'a [T],
    pub embeddings: Option<(&'a [T], &'a [T])>,
}

impl<'a, T> PairInput<'a, T> {
    pub fn new(test: &'a [T], reference: &'a [T]) -> Self {
        PairInput { test, reference, embeddings: None }
    }

    pub fn swapped(&self) -> Self {
        PairInput {
            test: self.reference,
            reference: self.test,
            embeddings: self.embeddings.map(|(a, b)| (b, a)),
        }
    }
}

#[derive(Debug, Clone)]
struct Direction<T> {
    /// Queries come from the test representation (else from the reference).
    test_queries: bool,
    attended: Attended<T>,
    sign: Vec<T>,
    head: HeadCache<T>,
    raw: Vec<T>,
}

/// Forward intermediates for one pair.
#[derive(Debug, Clone)]
pub struct PairCache<T> {
    test: EncoderCache<T>,
    reference: EncoderCache<T>,
    r_test: Matrix<T>,
    r_ref: Matrix<T>,
    /// `(test vs aligned reference, reference vs aligned test)`.
    directions: Vec<Direction<T>>,
}

impl<T: Real> PairCache<T> {
    /// Raw head outputs per direction: regression values or class logits.
    pub fn raw_outputs(&self) -> Vec<&[T]> {
        self.directions.iter().map(|d| d.raw.as_slice()).collect()
    }
}

#[derive(Debug, Clone)]
pub struct PairOutput<T> {
    pub score: Score,
    pub cache: PairCache<T>,
}

impl Svsnet {
    pub fn new(config: ModelConfig) -> (Self, ParamLayout) {
        let mut layout = ParamLayout::new();
        let encoder = Encoder::new(config.encoder, &mut layout);
        let head = PredictionHead::new(
            &mut layout,
            "head",
            encoder.output_width() + config.fusion_dim,
            config.head_hidden,
            config.output,
        );
        (Svsnet { config, encoder, head }, layout)
    }

    pub fn init_params<T: Real>(config: ModelConfig, seed: u64) -> (Self, ParamStore<T>) {
        let (model, layout) = Self::new(config);
        (model, ParamStore::init(&layout, seed))
    }

    pub fn layout(&self) -> ParamLayout {
        Self::new(self.config).1
    }

    pub fn encode<T: Real>(&self, store: &ParamStore<T>, samples: &[T]) -> Result<Matrix<T>> {
        Ok(self.encoder.forward(store, samples)?.0)
    }

    pub fn forward<T: Real>(&self, store: &ParamStore<T>, input: PairInput<'_, T>) -> Result<PairOutput<T>> {
        let (r_test, c_test) = self.encoder.forward(store, input.test)?;
        let (r_ref, c_ref) = self.encoder.forward(store, input.reference)?;
        let fused = match (self.config.fusion_dim, input.embeddings) {
            (0, _) => None,
            (dim, Some((a, b))) => {
                if a.len() != dim || b.len() != dim {
                    return Err(Error::WidthMismatch { expected: dim, got: a.len().min(b.len()) });
                }
                Some((a, b))
            }
            (_, None) => {
                return Err(Error::InvalidArgument("feature fusion model needs embeddings".into()));
            }
        };
        let aligned = co_attend(&r_test, &r_ref, self.config.attention)?;
        let mut directions = Vec::with_capacity(2);
        let mut pairs = Vec::with_capacity(2);
        pairs.push((true, aligned.ref_on_test, fused));
        if let Some(test_on_ref) = aligned.test_on_ref {
            pairs.push((false, test_on_ref, fused.map(|(a, b)| (b, a))));
        }
        let mut scores = Vec::with_capacity(2);
        for (test_queries, attended, emb) in pairs {
            let m_q = mean_pool(if test_queries { &r_test } else { &r_ref })?;
            let m_a = mean_pool(&attended.output)?;
            let mut d = distance(&m_q, &m_a)?;
            let sign = m_q.iter().zip(&m_a).map(|(&a, &b)| (a - b).sign0()).collect();
            if let Some((a, b)) = emb {
                d = feature_fusion_extend(&d, a, b)?;
            }
            let (raw, head) = self.head.forward(store, &d)?;
            scores.push(Score::from_outputs(self.config.output, &raw));
            directions.push(Direction { test_queries, attended, sign, head, raw });
        }
        let score = match scores.as_slice() {
            [s] => s.clone(),
            [a, b] => final_score(a, b)?,
            _ => unreachable!("one or two directions"),
        };
        Ok(PairOutput { score, cache: PairCache { test: c_test, reference: c_ref, r_test, r_ref, directions } })
    }

    pub fn score<T: Real>(&self, store: &ParamStore<T>, input: PairInput<'_, T>) -> Result<Score> {
        Ok(self.forward(store, input)?.score)
    }

    /// Backpropagates `g_raw[i]`, the loss gradient on direction `i`'s raw head
    /// outputs, accumulating into `grads`.
    pub fn backward<T: Real>(
        &self,
        store: &ParamStore<T>,
        cache: &PairCache<T>,
        g_raw: &[Vec<T>],
        grads: &mut ParamStore<T>,
    ) {
        assert_eq!(g_raw.len(), cache.directions.len());
        let width = self.encoder.output_width();
        let mut g_test = Matrix::zeros(cache.r_test.rows, width);
        let mut g_ref = Matrix::zeros(cache.r_ref.rows, width);
        for (dir, g) in cache.directions.iter().zip(g_raw) {
            let g_d = self.head.backward(store, &dir.head, g, grads);
            let (query, kv, g_query, g_kv) = if dir.test_queries {
                (&cache.r_test, &cache.r_ref, &mut g_test, &mut g_ref)
            } else {
                (&cache.r_ref, &cache.r_test, &mut g_ref, &mut g_test)
            };
            // d|m_q - m_a| / dm_q = sign, spread evenly over frames
            let tq = T::of(query.rows as f64);
            let ta = T::of(dir.attended.output.rows as f64);
            let g_mq: Vec<T> = (0..width).map(|j| g_d[j] * dir.sign[j] / tq).collect();
            let g_ma: Vec<T> = (0..width).map(|j| -g_d[j] * dir.sign[j] / ta).collect();
            let mut g_att = Matrix::zeros(dir.attended.output.rows, width);
            for t in 0..g_att.rows {
                g_att.row_mut(t).copy_from_slice(&g_ma);
            }
            let (gq, gk, gv) = attention_backward(query, kv, kv, &dir.attended.weights, &g_att);
            for t in 0..query.rows {
                for ((acc, &a), &b) in g_query.row_mut(t).iter_mut().zip(gq.row(t)).zip(&g_mq) {
                    *acc += a + b;
                }
            }
            for t in 0..kv.rows {
                for ((acc, &a), &b) in g_kv.row_mut(t).iter_mut().zip(gk.row(t)).zip(gv.row(t)) {
                    *acc += a + b;
                }
            }
        }
        self.encoder.backward(store, &cache.test, &g_test, grads);
        self.encoder.backward(store, &cache.reference, &g_ref, grads);
    }
}
