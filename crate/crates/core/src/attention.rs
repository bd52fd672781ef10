//! Scaled dot-product attention and the two-direction co-attention used to
//! align test and reference representations.

use alloc::vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::{axpy, dot, Real};
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionMode {
    /// Align each utterance to the other; the score is swap-symmetric.
    #[default]
    CoAttention,
    /// Align only the reference to the test utterance.
    SingleSided,
}

/// Output of one attention call plus the weights needed for backprop.
#[derive(Debug, Clone, PartialEq)]
pub struct Attended<T> {
    pub output: Matrix<T>,
    /// `T_q x T_k` row-stochastic weights.
    pub weights: Matrix<T>,
}

/// Row `i` of the output is `softmax(q_i . K^T / sqrt(d)) V`.
pub fn scaled_dot_attention<T: Real>(q: &Matrix<T>, k: &Matrix<T>, v: &Matrix<T>) -> Result<Attended<T>> {
    if q.cols != k.cols {
        return Err(Error::WidthMismatch { expected: q.cols, got: k.cols });
    }
    if k.rows != v.rows {
        return Err(Error::WidthMismatch { expected: k.rows, got: v.rows });
    }
    if k.rows == 0 {
        return Err(Error::Empty("attention needs at least one key"));
    }
    let scale = T::one() / T::of(q.cols as f64).sqrt();
    let mut weights = Matrix::zeros(q.rows, k.rows);
    let mut output = Matrix::zeros(q.rows, v.cols);
    for i in 0..q.rows {
        let qi = q.row(i);
        let w = weights.row_mut(i);
        for (j, wj) in w.iter_mut().enumerate() {
            *wj = dot(qi, k.row(j)) * scale;
        }
        softmax_in_place(w);
        let out = output.row_mut(i);
        for (j, &wj) in w.iter().enumerate() {
            axpy(wj, v.row(j), out);
        }
    }
    Ok(Attended { output, weights })
}

/// Max-subtracted softmax.
pub fn softmax_in_place<T: Real>(x: &mut [T]) {
    let max = x.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for v in x.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in x.iter_mut() {
        *v /= sum;
    }
}

/// Gradients of [`scaled_dot_attention`] with respect to `(q, k, v)`.
pub fn attention_backward<T: Real>(
    q: &Matrix<T>,
    k: &Matrix<T>,
    v: &Matrix<T>,
    weights: &Matrix<T>,
    g_out: &Matrix<T>,
) -> (Matrix<T>, Matrix<T>, Matrix<T>) {
    let scale = T::one() / T::of(q.cols as f64).sqrt();
    let mut gq = Matrix::zeros(q.rows, q.cols);
    let mut gk = Matrix::zeros(k.rows, k.cols);
    let mut gv = Matrix::zeros(v.rows, v.cols);
    let mut g_logit = vec![T::zero(); k.rows];
    for i in 0..q.rows {
        let w = weights.row(i);
        let go = g_out.row(i);
        let mut inner = T::zero();
        for j in 0..k.rows {
            axpy(w[j], go, gv.row_mut(j));
            let gw = dot(go, v.row(j));
            g_logit[j] = gw;
            inner += gw * w[j];
        }
        for j in 0..k.rows {
            let gs = w[j] * (g_logit[j] - inner) * scale;
            axpy(gs, k.row(j), gq.row_mut(i));
            axpy(gs, q.row(i), gk.row_mut(j));
        }
    }
    (gq, gk, gv)
}

/// Aligned representations produced by [`co_attend`].
#[derive(Debug, Clone, PartialEq)]
pub struct CoAttended<T> {
    /// Reference aligned to the test utterance; `len(test)` rows.
    pub ref_on_test: Attended<T>,
    /// Test aligned to the reference; `len(reference)` rows. Absent in
    /// single-sided mode.
    pub test_on_ref: Option<Attended<T>>,
}

pub fn co_attend<T: Real>(test: &Matrix<T>, reference: &Matrix<T>, mode: AttentionMode) -> Result<CoAttended<T>> {
    if test.cols != reference.cols {
        return Err(Error::WidthMismatch { expected: test.cols, got: reference.cols });
    }
    let ref_on_test = scaled_dot_attention(test, reference, reference)?;
    let test_on_ref = match mode {
        AttentionMode::CoAttention => Some(scaled_dot_attention(reference, test, test)?),
        AttentionMode::SingleSided => None,
    };
    Ok(CoAttended { ref_on_test, test_on_ref })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_key_returns_value_row() {
        let q = Matrix::from_rows(&[vec![1.0, 2.0], vec![-3.0, 0.5]]);
        let k = Matrix::from_rows(&[vec![0.3, 0.7]]);
        let v = Matrix::from_rows(&[vec![5.0, -1.0]]);
        let a = scaled_dot_attention(&q, &k, &v).unwrap();
        assert_eq!(a.output.row(0), v.row(0));
        assert_eq!(a.output.row(1), v.row(0));
    }

    #[test]
    fn orthogonal_query_averages_values() {
        let q = Matrix::from_rows(&[vec![0.0, 0.0, 1.0]]);
        let k = Matrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]);
        let v = Matrix::from_rows(&[vec![2.0, 0.0, 4.0], vec![0.0, 2.0, 0.0]]);
        let a = scaled_dot_attention(&q, &k, &v).unwrap();
        assert_eq!(a.output.row(0), &[1.0, 1.0, 2.0]);
    }

    #[test]
    fn hand_softmax_example() {
        // weights = softmax([1/sqrt(2), 0])
        let e = (1.0f64 / 2f64.sqrt()).exp();
        let w0 = e / (e + 1.0);
        let q = Matrix::from_rows(&[vec![1.0, 0.0]]);
        let k = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let a = scaled_dot_attention(&q, &k, &k).unwrap();
        approx::assert_abs_diff_eq!(a.weights.get(0, 0), w0, epsilon = 1e-15);
        approx::assert_abs_diff_eq!(a.output.get(0, 0), 0.6698, epsilon = 1e-4);
        approx::assert_abs_diff_eq!(a.output.get(0, 1), 0.3302, epsilon = 1e-4);
    }

    #[test]
    fn width_mismatch_is_error() {
        let q = Matrix::<f64>::zeros(2, 3);
        let k = Matrix::<f64>::zeros(2, 4);
        assert!(scaled_dot_attention(&q, &k, &k).is_err());
        assert!(co_attend(&q, &k, AttentionMode::CoAttention).is_err());
    }

    #[test]
    fn co_attention_lengths_follow_queries() {
        let t = Matrix::<f64>::zeros(5, 4);
        let r = Matrix::<f64>::zeros(9, 4);
        let c = co_attend(&t, &r, AttentionMode::CoAttention).unwrap();
        assert_eq!(c.ref_on_test.output.rows, 5);
        assert_eq!(c.test_on_ref.unwrap().output.rows, 9);
        let s = co_attend(&t, &r, AttentionMode::SingleSided).unwrap();
        assert!(s.test_on_ref.is_none());
    }

    #[test]
    fn large_logits_do_not_overflow() {
        let q = Matrix::from_rows(&[vec![1e4f32, 0.0]]);
        let k = Matrix::from_rows(&[vec![1e4f32, 0.0], vec![-1e4, 0.0]]);
        let a = scaled_dot_attention(&q, &k, &k).unwrap();
        assert!(a.weights.data.iter().all(|w| w.is_finite()));
        assert_eq!(a.weights.get(0, 0), 1.0);
    }
}
