//! Sequence-to-vector pooling (mean and scalar-weight self-attention) and
//! cosine similarity, with the analytic gradients needed for training.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Norm below which cosine similarity is refused.
pub const COSINE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolingKind {
    Mean,
    Attention,
}

impl PoolingKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PoolingKind::Mean => "mean",
            PoolingKind::Attention => "attention",
        }
    }
}

/// A pooling operator; attention carries its learnable scoring vector.
#[derive(Debug, Clone, PartialEq)]
pub enum PoolingSpec {
    Mean,
    Attention { w: Array1<f64> },
}

impl PoolingSpec {
    /// Attention pooling with `w = 0`, i.e. uniform weights.
    pub fn attention_zeros(dim: usize) -> Self {
        PoolingSpec::Attention { w: Array1::zeros(dim) }
    }

    pub fn kind(&self) -> PoolingKind {
        match self {
            PoolingSpec::Mean => PoolingKind::Mean,
            PoolingSpec::Attention { .. } => PoolingKind::Attention,
        }
    }

    pub fn pool(&self, seq: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        match self {
            PoolingSpec::Mean => mean_pool(seq),
            PoolingSpec::Attention { w } => attention_pool(seq, w.view()),
        }
    }
}

/// Time average of a `T × D` sequence.
pub fn mean_pool(seq: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
    if seq.nrows() == 0 {
        return Err(Error::EmptySequence);
    }
    Ok(seq.sum_axis(Axis(0)) / seq.nrows() as f64)
}

/// Softmax of `seq · w` over time, computed with max subtraction.
pub fn attention_weights(seq: ArrayView2<'_, f64>, w: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    if seq.nrows() == 0 {
        return Err(Error::EmptySequence);
    }
    if seq.ncols() != w.len() {
        return Err(Error::DimMismatch {
            expected: seq.ncols(),
            found: w.len(),
        });
    }
    let logits = seq.dot(&w);
    Ok(softmax(logits.view()))
}

pub(crate) fn softmax(logits: ArrayView1<'_, f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let exp = logits.mapv(|v| (v - max).exp());
    let total = exp.sum();
    exp / total
}

/// `Σ_t α_t h_t` with `α = softmax(h_t · w)`.
pub fn attention_pool(seq: ArrayView2<'_, f64>, w: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    let alpha = attention_weights(seq, w)?;
    // uniform weights reproduce the mean exactly
    if w.iter().all(|&v| v == 0.0) {
        return mean_pool(seq);
    }
    Ok(alpha.dot(&seq))
}

/// Gradients of `⟨upstream, attention_pool(seq, w)⟩`.
#[derive(Debug, Clone)]
pub struct AttentionPoolGrad {
    pub w: Array1<f64>,
    pub seq: Array2<f64>,
}

/// Vector-Jacobian product of [`attention_pool`] with respect to `w` and `seq`.
///
/// With `s_t = upstream · h_t` and `f = Σ α_t s_t`, the logit gradient is
/// `α_t (s_t - f)`; it flows to `w` through `h_t` and to `h_t` through `w`.
pub fn attention_pool_vjp(
    seq: ArrayView2<'_, f64>,
    w: ArrayView1<'_, f64>,
    upstream: ArrayView1<'_, f64>,
) -> Result<AttentionPoolGrad> {
    if upstream.len() != seq.ncols() {
        return Err(Error::DimMismatch {
            expected: seq.ncols(),
            found: upstream.len(),
        });
    }
    let alpha = attention_weights(seq, w)?;
    let scores = seq.dot(&upstream);
    let f = alpha.dot(&scores);
    let dlogits = &alpha * &(scores - f);
    let grad_w = dlogits.dot(&seq);
    let mut grad_seq = Array2::zeros(seq.raw_dim());
    for (t, mut row) in grad_seq.axis_iter_mut(Axis(0)).enumerate() {
        row.scaled_add(alpha[t], &upstream);
        row.scaled_add(dlogits[t], &w);
    }
    Ok(AttentionPoolGrad {
        w: grad_w,
        seq: grad_seq,
    })
}

/// Cosine similarity; refuses vectors with norm at or below [`COSINE_EPS`].
pub fn cosine(u: ArrayView1<'_, f64>, v: ArrayView1<'_, f64>) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    let (nu, nv) = (u.dot(&u).sqrt(), v.dot(&v).sqrt());
    if nu <= COSINE_EPS || nv <= COSINE_EPS {
        return Err(Error::NearZeroNorm);
    }
    Ok((u.dot(&v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Cosine similarity and its gradients with respect to both arguments.
pub fn cosine_with_grad(
    u: ArrayView1<'_, f64>,
    v: ArrayView1<'_, f64>,
) -> Result<(f64, Array1<f64>, Array1<f64>)> {
    let (nu, nv) = (u.dot(&u).sqrt(), v.dot(&v).sqrt());
    if nu <= COSINE_EPS || nv <= COSINE_EPS {
        return Err(Error::NearZeroNorm);
    }
    // unclamped so the gradient stays consistent with the value
    let c = u.dot(&v) / (nu * nv);
    let du = &v / (nu * nv) - &u * (c / (nu * nu));
    let dv = &u / (nu * nv) - &v * (c / (nv * nv));
    Ok((c, du, dv))
}
