//! Forward/derivative kernels shared by the tape and by plain callers.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{Error, Result};
use crate::math;

/// sqrt(2/pi)
const GELU_SCALE: f64 = 0.797_884_560_802_865_4;
const GELU_CUBIC: f64 = 0.044_715;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeluKind {
    /// `0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))`
    #[default]
    Tanh,
    /// `x Phi(x)` with the exact error function.
    Erf,
}

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

pub fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        slope * x
    }
}

pub(crate) fn leaky_relu_grad(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        slope
    }
}

pub fn gelu(x: f64, kind: GeluKind) -> f64 {
    match kind {
        GeluKind::Tanh => {
            let inner = GELU_SCALE * (x + GELU_CUBIC * x * x * x);
            0.5 * x * (1.0 + math::tanh(inner))
        }
        GeluKind::Erf => 0.5 * x * (1.0 + math::erf(x / core::f64::consts::SQRT_2)),
    }
}

pub(crate) fn gelu_grad(x: f64, kind: GeluKind) -> f64 {
    match kind {
        GeluKind::Tanh => {
            let inner = GELU_SCALE * (x + GELU_CUBIC * x * x * x);
            let t = math::tanh(inner);
            let d_inner = GELU_SCALE * (1.0 + 3.0 * GELU_CUBIC * x * x);
            0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * d_inner
        }
        GeluKind::Erf => {
            let cdf = 0.5 * (1.0 + math::erf(x / core::f64::consts::SQRT_2));
            let pdf = math::exp(-0.5 * x * x) / math::sqrt(2.0 * math::PI);
            cdf + x * pdf
        }
    }
}

/// Numerically stable softmax of a non-empty slice.
pub fn softmax(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::EmptyNormalization);
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = values.iter().map(|v| math::exp(v - max)).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// Cached statistics of a batch-norm forward pass.
#[derive(Clone, Debug)]
pub(crate) struct BatchStats {
    pub normalized: Tensor,
    pub inv_std: Vec<f64>,
}

/// Per-column standardization over all rows, then `gamma * xhat + beta`.
///
/// Uses the biased variance. A column whose variance plus `eps` is zero
/// normalizes to zero.
pub fn batch_norm(x: &Tensor, gamma: &Tensor, beta: &Tensor, eps: f64) -> Result<Tensor> {
    batch_norm_with_stats(x, gamma, beta, eps).map(|(y, _)| y)
}

pub(crate) fn batch_norm_with_stats(
    x: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    eps: f64,
) -> Result<(Tensor, BatchStats)> {
    let (n, d) = x.dims2();
    if n == 0 || x.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if gamma.len() != d || beta.len() != d {
        return Err(Error::Shape {
            op: "batch_norm",
            left: x.shape().to_vec(),
            right: gamma.shape().to_vec(),
        });
    }
    if eps < 0.0 {
        return Err(crate::error::domain(
            "batch_norm",
            "eps must be non-negative",
        ));
    }
    let data = x.data();
    let mut mean = vec![0.0; d];
    for row in data.chunks_exact(d) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut var = vec![0.0; d];
    for row in data.chunks_exact(d) {
        for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
            let c = v - m;
            *s += c * c;
        }
    }
    let inv_std: Vec<f64> = var
        .iter()
        .map(|s| {
            let denom = s / n as f64 + eps;
            if denom > 0.0 {
                1.0 / math::sqrt(denom)
            } else {
                0.0
            }
        })
        .collect();
    let mut normalized = vec![0.0; n * d];
    let mut out = vec![0.0; n * d];
    for r in 0..n {
        for c in 0..d {
            let xhat = (data[r * d + c] - mean[c]) * inv_std[c];
            normalized[r * d + c] = xhat;
            out[r * d + c] = gamma.data()[c] * xhat + beta.data()[c];
        }
    }
    let shape = x.shape().to_vec();
    Ok((
        Tensor::new(shape.clone(), out)?,
        BatchStats {
            normalized: Tensor::new(shape, normalized)?,
            inv_std,
        },
    ))
}
