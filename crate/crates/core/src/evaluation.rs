//! Classification metrics, per-client fairness and convergence diagnostics.
//!
//! Predictions use a fixed 0.5 threshold with ties classified positive.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::federation::EvalSets;
use crate::model::{predict_proba, ModelParams};

pub const THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSummary {
    pub accuracy: f64,
    pub auc_roc: f64,
    pub f1: f64,
    pub per_client_accuracy: Vec<f64>,
    /// Population std of `per_client_accuracy`.
    pub fairness_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceDiag {
    /// 1-based round at which accuracy first reached 95% of its final value.
    pub rounds_to_95pct: usize,
    pub final_accuracy: f64,
    pub avg_weight_delta: f64,
}

fn check_lengths(probs: &[f64], labels: &[u8]) -> Result<()> {
    if probs.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: probs.len(),
            actual: labels.len(),
        });
    }
    if probs.is_empty() {
        return Err(Error::InvalidInput("metric needs at least one prediction".into()));
    }
    Ok(())
}

pub fn accuracy(probs: &[f64], labels: &[u8], threshold: f64) -> Result<f64> {
    check_lengths(probs, labels)?;
    let correct = probs
        .iter()
        .zip(labels)
        .filter(|(&p, &y)| u8::from(p >= threshold) == y)
        .count();
    Ok(correct as f64 / probs.len() as f64)
}

/// Mann-Whitney AUC: the fraction of (positive, negative) pairs ranked
/// correctly, ties counted one half. Computed from mid-ranks in O(n log n).
pub fn auc_roc(probs: &[f64], labels: &[u8]) -> Result<f64> {
    check_lengths(probs, labels)?;
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedAuc);
    }
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[a].total_cmp(&probs[b]));

    // sum of mid-ranks (1-based) of the positives
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && probs[order[j + 1]] == probs[order[i]] {
            j += 1;
        }
        let mid_rank = (i + j) as f64 / 2.0 + 1.0;
        let pos_in_tie = order[i..=j].iter().filter(|&&k| labels[k] == 1).count();
        rank_sum += mid_rank * pos_in_tie as f64;
        i = j + 1;
    }
    let n_pos_f = n_pos as f64;
    let u = rank_sum - n_pos_f * (n_pos_f + 1.0) / 2.0;
    Ok(u / (n_pos_f * n_neg as f64))
}

/// F1 of the positive class; 0 when precision + recall is 0.
pub fn f1_score(probs: &[f64], labels: &[u8], threshold: f64) -> Result<f64> {
    check_lengths(probs, labels)?;
    let (mut tp, mut fp, mut fnc) = (0usize, 0usize, 0usize);
    for (&p, &y) in probs.iter().zip(labels) {
        match (p >= threshold, y == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fnc += 1,
            (false, false) => {}
        }
    }
    if tp == 0 {
        return Ok(0.0);
    }
    // 2PR / (P + R) in count form, a single rounding
    Ok((2 * tp) as f64 / (2 * tp + fp + fnc) as f64)
}

pub(crate) fn population_std(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt()
}

pub fn convergence_rounds(accuracy: &[f64], weight_deltas: &[f64]) -> Result<ConvergenceDiag> {
    let Some(&final_accuracy) = accuracy.last() else {
        return Err(Error::InvalidInput(
            "convergence needs a non-empty accuracy series".into(),
        ));
    };
    let target = 0.95 * final_accuracy;
    let idx = accuracy.iter().position(|&a| a >= target).unwrap_or(accuracy.len() - 1);
    let avg_weight_delta = if weight_deltas.is_empty() {
        0.0
    } else {
        weight_deltas.iter().sum::<f64>() / weight_deltas.len() as f64
    };
    Ok(ConvergenceDiag {
        rounds_to_95pct: idx + 1,
        final_accuracy,
        avg_weight_delta,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FairnessRow {
    pub client_id: u32,
    pub name: String,
    pub local_accuracy: f64,
    pub federated_accuracy: f64,
    pub improvement_pp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FairnessTable {
    pub rows: Vec<FairnessRow>,
    pub local_std: f64,
    pub federated_std: f64,
    /// `1 - federated_std / local_std`; `None` when local_std is 0 but
    /// federated_std is not.
    pub std_reduction: Option<f64>,
}

pub fn fairness_table(clients: &[(u32, String)], local: &[f64], federated: &[f64]) -> Result<FairnessTable> {
    if local.len() != clients.len() || federated.len() != clients.len() {
        return Err(Error::DimensionMismatch {
            expected: clients.len(),
            actual: local.len().min(federated.len()),
        });
    }
    let rows = clients
        .iter()
        .zip(local.iter().zip(federated))
        .map(|((id, name), (&l, &f))| FairnessRow {
            client_id: *id,
            name: name.clone(),
            local_accuracy: l,
            federated_accuracy: f,
            improvement_pp: (f - l) * 100.0,
        })
        .collect();
    let local_std = population_std(local);
    let federated_std = population_std(federated);
    let std_reduction = if local_std > 0.0 {
        Some(1.0 - federated_std / local_std)
    } else if federated_std == 0.0 {
        Some(0.0)
    } else {
        None
    };
    Ok(FairnessTable {
        rows,
        local_std,
        federated_std,
        std_reduction,
    })
}

/// Accuracy of `params` on the pooled test set and on each client's test set.
pub(crate) fn global_and_client_accuracy(params: &ModelParams, eval: &EvalSets<'_>) -> Result<(f64, Vec<f64>)> {
    let probs = predict_proba(params, &eval.pooled.features)?;
    let global = accuracy(&probs, &eval.pooled.labels, THRESHOLD)?;
    let per_client = eval
        .per_client
        .iter()
        .map(|s| accuracy(&predict_proba(params, &s.features)?, &s.labels, THRESHOLD))
        .collect::<Result<Vec<_>>>()?;
    Ok((global, per_client))
}

/// Full metrics for one global model: pooled accuracy/AUC/F1, per-client
/// accuracy.
pub(crate) fn summarize_global(params: &ModelParams, eval: &EvalSets<'_>) -> Result<MetricSummary> {
    let probs = predict_proba(params, &eval.pooled.features)?;
    let (accuracy, per_client_accuracy) = global_and_client_accuracy(params, eval)?;
    Ok(MetricSummary {
        accuracy,
        auc_roc: auc_roc(&probs, &eval.pooled.labels)?,
        f1: f1_score(&probs, &eval.pooled.labels, THRESHOLD)?,
        fairness_std: population_std(&per_client_accuracy),
        per_client_accuracy,
    })
}
