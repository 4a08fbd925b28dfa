//! Centralized and local-only comparison regimes.
//!
//! Both run L2-regularized minibatch SGD for `rounds * local_epochs` epochs
//! with the federated learning-rate schedule mapped onto epochs (epoch `e`
//! uses the rate of round `e / local_epochs`), so every regime spends the
//! same number of passes over its data.

use serde::{Deserialize, Serialize};

use crate::data::{apply_standardizer, fit_standardizer, Samples, CONTINUOUS_MASK};
use crate::error::{Error, Result};
use crate::evaluation::{self, population_std, MetricSummary, THRESHOLD};
use crate::federation::{for_each_minibatch, learning_rate, EvalSets, FedConfig};
use crate::model::{l2_regularized_grad, predict_proba, ModelParams};
use crate::partition::ClientDataset;
use crate::rng;

/// The baselines share the federated schedule fields.
pub type TrainSchedule = FedConfig;

pub const DEFAULT_LAMBDA: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Centralized,
    LocalOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineResult {
    pub regime: BaselineKind,
    /// One model for centralized, one per client (input order) for local-only.
    pub params_per_site: Vec<ModelParams>,
    pub metrics: MetricSummary,
}

/// SGD with L2 over `data`; the shuffle stream is keyed by `(seed, tags)`.
pub fn train_sgd(data: &Samples, schedule: &TrainSchedule, lambda: f64, stream_tags: &[u64]) -> Result<ModelParams> {
    schedule.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidInput("training set is empty".into()));
    }
    if !(lambda >= 0.0) {
        return Err(Error::Config(format!("lambda {lambda} must be nonnegative")));
    }
    let mut rng = rng::stream(schedule.seed, stream_tags);
    let mut w = ModelParams::zeros(data.dim());
    let epochs = schedule.rounds * schedule.local_epochs;
    for_each_minibatch(data.len(), epochs, schedule.batch_size, &mut rng, |epoch, batch| {
        let lr = learning_rate(schedule, epoch / schedule.local_epochs);
        let g = l2_regularized_grad(&w, data.select(batch), lambda);
        for (wi, gi) in w.weights.iter_mut().zip(&g.d_weights) {
            *wi -= lr * gi;
        }
        w.bias -= lr * g.d_bias;
    });
    if !w.is_finite() {
        return Err(Error::InvalidInput("SGD diverged to non-finite parameters".into()));
    }
    Ok(w)
}

fn sorted_by_id(clients: &[ClientDataset]) -> Vec<&ClientDataset> {
    let mut v: Vec<&ClientDataset> = clients.iter().collect();
    v.sort_by_key(|c| c.client_id);
    v
}

/// Pools every client's (already standardized) training rows into one model.
///
/// With `restandardize`, the raw training rows are pooled and standardized
/// with a single global fit instead, and each client's raw test rows are
/// transformed with that same fit for evaluation.
pub fn train_centralized(
    clients: &[ClientDataset],
    schedule: &TrainSchedule,
    lambda: f64,
    restandardize: bool,
) -> Result<BaselineResult> {
    let ordered = sorted_by_id(clients);
    let (pooled, test_sets) = if restandardize {
        let raw = Samples::concat(ordered.iter().map(|c| &c.raw_split.train));
        if raw.is_empty() {
            return Err(Error::InvalidInput("pooled training set is empty".into()));
        }
        let params = fit_standardizer(&raw.features, &CONTINUOUS_MASK)?;
        let pooled = Samples {
            features: apply_standardizer(&raw.features, &params)?,
            labels: raw.labels,
        };
        let tests = clients
            .iter()
            .map(|c| {
                Ok(Samples {
                    features: apply_standardizer(&c.raw_split.test.features, &params)?,
                    labels: c.raw_split.test.labels.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        (pooled, Some(tests))
    } else {
        (Samples::concat(ordered.iter().map(|c| &c.split.train)), None)
    };

    let params = train_sgd(&pooled, schedule, lambda, &[rng::TAG_CENTRAL])?;
    let metrics = match &test_sets {
        None => evaluation::summarize_global(&params, &EvalSets::new(clients))?,
        Some(tests) => evaluation::summarize_global(
            &params,
            &EvalSets {
                pooled: Samples::concat(tests),
                per_client: tests.iter().collect(),
            },
        )?,
    };
    Ok(BaselineResult {
        regime: BaselineKind::Centralized,
        params_per_site: vec![params],
        metrics,
    })
}

/// One independent model per client, each evaluated on its own test split.
/// Accuracy, AUC and F1 are averaged across clients.
pub fn train_local_only(clients: &[ClientDataset], schedule: &TrainSchedule, lambda: f64) -> Result<BaselineResult> {
    if clients.is_empty() {
        return Err(Error::InvalidInput(
            "local-only training needs at least one client".into(),
        ));
    }
    let mut params_per_site = Vec::with_capacity(clients.len());
    let mut acc = Vec::with_capacity(clients.len());
    let mut auc = Vec::with_capacity(clients.len());
    let mut f1 = Vec::with_capacity(clients.len());
    for c in clients {
        // the stream does not depend on the client, so identical data gives
        // identical models regardless of position
        let p = train_sgd(&c.split.train, schedule, lambda, &[rng::TAG_LOCAL])?;
        let test = &c.split.test;
        let probs = predict_proba(&p, &test.features)?;
        acc.push(evaluation::accuracy(&probs, &test.labels, THRESHOLD)?);
        auc.push(evaluation::auc_roc(&probs, &test.labels)?);
        f1.push(evaluation::f1_score(&probs, &test.labels, THRESHOLD)?);
        params_per_site.push(p);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(BaselineResult {
        regime: BaselineKind::LocalOnly,
        params_per_site,
        metrics: MetricSummary {
            accuracy: mean(&acc),
            auc_roc: mean(&auc),
            f1: mean(&f1),
            fairness_std: population_std(&acc),
            per_client_accuracy: acc,
        },
    })
}
