//! Losses, the Adam optimizer, mini-batch training and gradient checking.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::head::{OutputKind, Score, CLASSES};
use crate::metrics::{mse, pearson_lcc, spearman_srcc};
use crate::model::{ModelConfig, PairInput, Svsnet};
use crate::params::ParamStore;
use crate::real::Real;
use crate::rng::Rng;

/// Squared error and its derivative with respect to `pred`.
pub fn loss_mse<T: Real>(pred: T, target: T) -> (T, T) {
    let d = pred - target;
    (d * d, T::of(2.0) * d)
}

fn log_softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = max + logits.iter().map(|&z| (z - max).exp()).sum::<T>().ln();
    logits.iter().map(|&z| z - lse).collect()
}

/// `-log softmax(logits)[target]` and its gradient `softmax(logits) - onehot`.
pub fn loss_ce<T: Real>(logits: &[T], target: usize) -> Result<(T, Vec<T>)> {
    if target >= logits.len() {
        return Err(invalid("target class out of range"));
    }
    let logp = log_softmax(logits);
    let mut grad: Vec<T> = logp.iter().map(|&l| l.exp()).collect();
    grad[target] -= T::one();
    Ok((-logp[target], grad))
}

/// Cross entropy of the averaged two-head distribution
/// `-log((p_a[c] + p_b[c]) / 2)`, with gradients for both logit vectors.
pub fn loss_ce_averaged<T: Real>(a: &[T], b: &[T], target: usize) -> Result<(T, Vec<T>, Vec<T>)> {
    if target >= a.len() || target >= b.len() {
        return Err(invalid("target class out of range"));
    }
    let la = log_softmax(a);
    let lb = log_softmax(b);
    let (x, y) = (la[target], lb[target]);
    let m = x.max(y);
    let log_sum = m + ((x - m).exp() + (y - m).exp()).ln();
    let loss = T::of(core::f64::consts::LN_2) - log_sum;
    // share of each head in the averaged target probability
    let wa = (x - log_sum).exp();
    let wb = (y - log_sum).exp();
    let grad = |logp: &[T], w: T| -> Vec<T> {
        logp.iter()
            .enumerate()
            .map(|(i, &l)| w * (l.exp() - if i == target { T::one() } else { T::zero() }))
            .collect()
    };
    Ok((loss, grad(&la, wa), grad(&lb, wb)))
}

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    m: ParamStore<T>,
    v: ParamStore<T>,
}

impl<T: Real> Adam<T> {
    pub fn new(params: &ParamStore<T>, learning_rate: f64, beta1: f64, beta2: f64) -> Self {
        Adam { learning_rate, beta1, beta2, eps: 1e-8, t: 0, m: params.zeros_like(), v: params.zeros_like() }
    }

    pub fn step(&mut self, params: &mut ParamStore<T>, grads: &ParamStore<T>) {
        self.t += 1;
        let (b1, b2) = (T::of(self.beta1), T::of(self.beta2));
        let c1 = T::of(1.0 - libm::pow(self.beta1, self.t as f64));
        let c2 = T::of(1.0 - libm::pow(self.beta2, self.t as f64));
        let lr = T::of(self.learning_rate);
        let eps = T::of(self.eps);
        let tensors = params.tensors_mut().iter_mut().zip(grads.tensors());
        let moments = self.m.tensors_mut().iter_mut().zip(self.v.tensors_mut().iter_mut());
        for ((p, g), (m, v)) in tensors.zip(moments) {
            for i in 0..p.data.len() {
                let gi = g.data[i];
                m.data[i] = b1 * m.data[i] + (T::one() - b1) * gi;
                v.data[i] = b2 * v.data[i] + (T::one() - b2) * gi * gi;
                let m_hat = m.data[i] / c1;
                let v_hat = v.data[i] / c2;
                p.data[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationMetric {
    /// Utterance-level Pearson correlation (higher is better).
    #[default]
    UtteranceLcc,
    /// Utterance-level mean squared error (lower is better).
    UtteranceMse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub max_steps: Option<u64>,
    /// Validations without improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    pub validation_metric: ValidationMetric,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelConfig::default(),
            learning_rate: 1e-4,
            adam_beta1: 0.5,
            adam_beta2: 0.999,
            batch_size: 5,
            epochs: 30,
            max_steps: None,
            patience: 10,
            seed: 0,
            validation_metric: ValidationMetric::UtteranceLcc,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(invalid("batch_size must be at least 1"));
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(invalid(alloc::format!("{name} must lie in (0, 1)")));
            }
        }
        if !(self.learning_rate >= 0.0) {
            return Err(invalid("learning_rate must be non-negative"));
        }
        Ok(())
    }
}

/// One rating of one pair, with waveforms already at the model rate.
#[derive(Debug, Clone)]
pub struct TrainSample<T> {
    pub test: Arc<[T]>,
    pub reference: Arc<[T]>,
    pub embeddings: Option<(Arc<[T]>, Arc<[T]>)>,
    /// 1..=4.
    pub rating: u8,
}

impl<T> TrainSample<T> {
    pub fn input(&self) -> PairInput<'_, T> {
        PairInput {
            test: &self.test,
            reference: &self.reference,
            embeddings: self.embeddings.as_ref().map(|(a, b)| (&a[..], &b[..])),
        }
    }
}

/// A rating-averaged pair used for validation.
#[derive(Debug, Clone)]
pub struct EvalSample<T> {
    pub test: Arc<[T]>,
    pub reference: Arc<[T]>,
    pub embeddings: Option<(Arc<[T]>, Arc<[T]>)>,
    pub mean_score: f64,
}

impl<T> EvalSample<T> {
    pub fn input(&self) -> PairInput<'_, T> {
        PairInput {
            test: &self.test,
            reference: &self.reference,
            embeddings: self.embeddings.as_ref().map(|(a, b)| (&a[..], &b[..])),
        }
    }
}

/// Loss of one pair against `rating`; when `grads` is given the gradient is
/// accumulated into it.
pub fn pair_loss<T: Real>(
    model: &Svsnet,
    params: &ParamStore<T>,
    input: PairInput<'_, T>,
    rating: u8,
    grads: Option<&mut ParamStore<T>>,
) -> Result<(T, Score)> {
    if !(1..=4).contains(&rating) {
        return Err(Error::RatingOutOfRange(rating as i64));
    }
    let out = model.forward(params, input)?;
    let raw = out.cache.raw_outputs();
    let (loss, g_raw): (T, Vec<Vec<T>>) = match model.config.output {
        OutputKind::Regression => {
            let pred = raw.iter().map(|r| r[0]).sum::<T>() / T::of(raw.len() as f64);
            let (l, g) = loss_mse(pred, T::of(rating as f64));
            let share = g / T::of(raw.len() as f64);
            (l, raw.iter().map(|_| vec![share]).collect())
        }
        OutputKind::Classification => {
            let target = rating as usize - 1;
            match raw.as_slice() {
                [a] => {
                    let (l, g) = loss_ce(a, target)?;
                    (l, vec![g])
                }
                [a, b] => {
                    let (l, ga, gb) = loss_ce_averaged(a, b, target)?;
                    (l, vec![ga, gb])
                }
                _ => unreachable!("one or two directions"),
            }
        }
    };
    if let Some(grads) = grads {
        model.backward(params, &out.cache, &g_raw, grads);
    }
    Ok((loss, out.score))
}

/// Owns the model parameters and optimizer state.
#[derive(Debug, Clone)]
pub struct Trainer<T> {
    pub model: Svsnet,
    pub params: ParamStore<T>,
    pub optimizer: Adam<T>,
    pub step: u64,
    grads: ParamStore<T>,
}

impl<T: Real> Trainer<T> {
    pub fn new(config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        let (model, params) = Svsnet::init_params(config.model, config.seed);
        Ok(Self::from_params(model, params, config))
    }

    pub fn from_params(model: Svsnet, params: ParamStore<T>, config: &TrainConfig) -> Self {
        let optimizer = Adam::new(&params, config.learning_rate, config.adam_beta1, config.adam_beta2);
        let grads = params.zeros_like();
        Trainer { model, params, optimizer, step: 0, grads }
    }

    /// One optimizer step on the averaged gradient of `batch`; returns the
    /// mean loss. Each pair is forwarded on its own, so lengths may differ.
    pub fn train_step(&mut self, batch: &[&TrainSample<T>]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Empty("empty batch"));
        }
        self.grads.fill_zero();
        let mut total = 0.0;
        for sample in batch {
            let (loss, _) = pair_loss(&self.model, &self.params, sample.input(), sample.rating, Some(&mut self.grads))?;
            total += loss.f64();
        }
        let loss = total / batch.len() as f64;
        if !loss.is_finite() || !self.grads.is_finite() {
            return Err(Error::NonFiniteLoss { step: self.step + 1 });
        }
        self.grads.scale(T::one() / T::of(batch.len() as f64));
        self.optimizer.step(&mut self.params, &self.grads);
        self.step += 1;
        Ok(loss)
    }

    pub fn predict(&self, input: PairInput<'_, T>) -> Result<Score> {
        self.model.score(&self.params, input)
    }
}

/// Batch composition for `epoch`: a seed-determined permutation of `0..n`.
pub fn epoch_order(n: usize, seed: u64, epoch: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    Rng::derived(seed, epoch + 1).shuffle(&mut order);
    order
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationSummary {
    pub lcc: Option<f64>,
    pub srcc: Option<f64>,
    pub mse: f64,
}

/// Scores every pair and compares against the averaged ratings.
pub fn validate<T: Real>(model: &Svsnet, params: &ParamStore<T>, val: &[EvalSample<T>]) -> Result<ValidationSummary> {
    let mut preds = Vec::with_capacity(val.len());
    for s in val {
        preds.push(model.score(params, s.input())?.value());
    }
    let truth: Vec<f64> = val.iter().map(|s| s.mean_score).collect();
    Ok(ValidationSummary {
        lcc: pearson_lcc(&preds, &truth).ok(),
        srcc: spearman_srcc(&preds, &truth).ok(),
        mse: mse(&preds, &truth),
    })
}

/// One training-log line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub step: u64,
    pub epoch: u64,
    pub loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation: Option<ValidationSummary>,
}

#[derive(Debug, Clone)]
pub struct FitOutcome<T> {
    /// Parameters at the best validation score (final parameters when no
    /// validation set is given).
    pub best: ParamStore<T>,
    pub best_step: u64,
    pub best_validation: Option<ValidationSummary>,
    pub steps: u64,
}

fn metric_value(metric: ValidationMetric, v: &ValidationSummary) -> f64 {
    match metric {
        ValidationMetric::UtteranceLcc => v.lcc.unwrap_or(f64::NEG_INFINITY),
        ValidationMetric::UtteranceMse => -v.mse,
    }
}

/// Epoch loop with per-epoch validation, best-model selection and early stopping.
pub fn fit<T: Real>(
    trainer: &mut Trainer<T>,
    config: &TrainConfig,
    train: &[TrainSample<T>],
    val: &[EvalSample<T>],
    mut on_log: impl FnMut(&LogEntry),
) -> Result<FitOutcome<T>> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let mut best = trainer.params.clone();
    let mut best_step = trainer.step;
    let mut best_validation = None;
    let mut best_value = f64::NEG_INFINITY;
    let mut stale = 0;
    'epochs: for epoch in 0..config.epochs as u64 {
        let order = epoch_order(train.len(), config.seed, epoch);
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(config.batch_size) {
            if config.max_steps.is_some_and(|m| trainer.step >= m) {
                break;
            }
            let batch: Vec<&TrainSample<T>> = chunk.iter().map(|&i| &train[i]).collect();
            let loss = trainer.train_step(&batch)?;
            epoch_loss += loss;
            batches += 1;
            on_log(&LogEntry { step: trainer.step, epoch, loss, validation: None });
        }
        let done = config.max_steps.is_some_and(|m| trainer.step >= m);
        if batches == 0 {
            break;
        }
        if val.is_empty() {
            best = trainer.params.clone();
            best_step = trainer.step;
        } else {
            let summary = validate(&trainer.model, &trainer.params, val)?;
            on_log(&LogEntry {
                step: trainer.step,
                epoch,
                loss: epoch_loss / batches as f64,
                validation: Some(summary.clone()),
            });
            let value = metric_value(config.validation_metric, &summary);
            if value > best_value || best_validation.is_none() {
                best_value = value;
                best = trainer.params.clone();
                best_step = trainer.step;
                best_validation = Some(summary);
                stale = 0;
            } else {
                stale += 1;
                if stale >= config.patience {
                    break 'epochs;
                }
            }
        }
        if done {
            break;
        }
    }
    Ok(FitOutcome { best, best_step, best_validation, steps: trainer.step })
}

/// Largest relative gradient error within one parameter group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupError {
    pub group: String,
    pub max_rel_error: f64,
    pub checked: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub groups: Vec<GroupError>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.groups.iter().map(|g| g.max_rel_error).fold(0.0, f64::max)
    }
}

/// Gradients smaller than this are compared in absolute terms.
pub const GRAD_CHECK_FLOOR: f64 = 1e-6;

/// `|a - n| / max(|a|, |n|, GRAD_CHECK_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR)
}

/// Groups tensor names into frontend, convolution, recurrent and head parameters.
pub fn param_group(name: &str) -> &'static str {
    if name.starts_with("frontend.") {
        "sinc"
    } else if name.starts_with("encoder.blstm") {
        "recurrent"
    } else if name.starts_with("encoder.") {
        "conv"
    } else {
        "head"
    }
}

/// Compares backprop gradients with central differences of the pair loss.
///
/// `max_per_tensor` limits how many (evenly strided) entries of each tensor
/// are perturbed; `None` checks every scalar.
pub fn gradient_check(
    model: &Svsnet,
    params: &ParamStore<f64>,
    input: PairInput<'_, f64>,
    rating: u8,
    epsilon: f64,
    max_per_tensor: Option<usize>,
) -> Result<GradCheckReport> {
    if !(epsilon > 0.0) {
        return Err(invalid("epsilon must be positive"));
    }
    let mut grads = params.zeros_like();
    pair_loss(model, params, input, rating, Some(&mut grads))?;
    let mut probe = params.clone();
    let mut groups: Vec<GroupError> = Vec::new();
    for ti in 0..params.len() {
        let name = params.tensors()[ti].name.clone();
        let n = params.tensors()[ti].data.len();
        let stride = match max_per_tensor {
            Some(m) if m > 0 && n > m => n.div_ceil(m),
            _ => 1,
        };
        let group = param_group(&name);
        let mut worst = 0.0f64;
        let mut checked = 0;
        for i in (0..n).step_by(stride) {
            let orig = probe.tensors()[ti].data[i];
            probe.tensors_mut()[ti].data[i] = orig + epsilon;
            let (plus, _) = pair_loss(model, &probe, input, rating, None)?;
            probe.tensors_mut()[ti].data[i] = orig - epsilon;
            let (minus, _) = pair_loss(model, &probe, input, rating, None)?;
            probe.tensors_mut()[ti].data[i] = orig;
            let numeric = (plus - minus) / (2.0 * epsilon);
            worst = worst.max(relative_error(grads.tensors()[ti].data[i], numeric));
            checked += 1;
        }
        match groups.iter_mut().find(|g| g.group == group) {
            Some(g) => {
                g.max_rel_error = g.max_rel_error.max(worst);
                g.checked += checked;
            }
            None => groups.push(GroupError { group: group.into(), max_rel_error: worst, checked }),
        }
    }
    Ok(GradCheckReport { groups })
}

/// Probability vector helper for callers holding raw classification logits.
pub fn softmax_probs(logits: &[f64]) -> [f64; CLASSES] {
    let lp = log_softmax(logits);
    [libm::exp(lp[0]), libm::exp(lp[1]), libm::exp(lp[2]), libm::exp(lp[3])]
}
