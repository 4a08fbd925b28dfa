//! Logistic-regression primitives shared by every training regime.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PROB_CLAMP: f64 = 1e-12;

/// Weights plus a bias; the unit exchanged in federation rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl ModelParams {
    pub fn zeros(dim: usize) -> Self {
        ModelParams {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn is_finite(&self) -> bool {
        self.bias.is_finite() && self.weights.iter().all(|w| w.is_finite())
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).fold(self.bias, |acc, (w, xi)| acc + w * xi)
    }

    /// Euclidean distance over the concatenated (weights, bias) vector.
    pub fn distance(&self, other: &ModelParams) -> f64 {
        let sq: f64 = self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            + (self.bias - other.bias).powi(2);
        sq.sqrt()
    }

    /// Coordinates as one flat vector, bias last.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.weights.clone();
        v.push(self.bias);
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientVec {
    pub d_weights: Vec<f64>,
    pub d_bias: f64,
}

impl GradientVec {
    pub fn zeros(dim: usize) -> Self {
        GradientVec {
            d_weights: vec![0.0; dim],
            d_bias: 0.0,
        }
    }
}

/// Numerically stable logistic function, clamped to the open interval (0, 1).
pub fn sigmoid(z: f64) -> f64 {
    let s = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    s.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// Cross-entropy for one sample.
pub fn loss(params: &ModelParams, x: &[f64], y: u8) -> f64 {
    let p = sigmoid(params.logit(x)).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    if y == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Mean cross-entropy over a batch.
pub fn mean_loss<'a>(params: &ModelParams, batch: impl IntoIterator<Item = (&'a [f64], u8)>) -> f64 {
    let (sum, n) = batch
        .into_iter()
        .fold((0.0, 0usize), |(s, n), (x, y)| (s + loss(params, x, y), n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Batch-mean gradient of the cross-entropy. An empty batch yields zeros.
pub fn grad<'a>(params: &ModelParams, batch: impl IntoIterator<Item = (&'a [f64], u8)>) -> GradientVec {
    let mut g = GradientVec::zeros(params.dim());
    let mut n = 0usize;
    for (x, y) in batch {
        let residual = sigmoid(params.logit(x)) - f64::from(y);
        for (gw, xi) in g.d_weights.iter_mut().zip(x) {
            *gw += residual * xi;
        }
        g.d_bias += residual;
        n += 1;
    }
    if n > 0 {
        let inv = 1.0 / n as f64;
        for gw in &mut g.d_weights {
            *gw *= inv;
        }
        g.d_bias *= inv;
    }
    g
}

/// Gradient of mean loss + (lambda/2)||w||^2; the bias is not penalized.
pub fn l2_regularized_grad<'a>(
    params: &ModelParams,
    batch: impl IntoIterator<Item = (&'a [f64], u8)>,
    lambda: f64,
) -> GradientVec {
    let mut g = grad(params, batch);
    for (gw, w) in g.d_weights.iter_mut().zip(&params.weights) {
        *gw += lambda * w;
    }
    g
}

pub fn predict_proba(params: &ModelParams, features: &[Vec<f64>]) -> Result<Vec<f64>> {
    features
        .iter()
        .map(|row| {
            if row.len() != params.dim() {
                return Err(Error::DimensionMismatch {
                    expected: params.dim(),
                    actual: row.len(),
                });
            }
            Ok(sigmoid(params.logit(row)))
        })
        .collect()
}
