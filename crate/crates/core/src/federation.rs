//! Round-based federated training: FedAvg and FedProx.
//!
//! Every round broadcasts the global model, runs local minibatch SGD on each
//! client, and replaces the global model with the sample-size-weighted mean
//! of the client models. FedProx adds `mu * (w - w_t)` to every local
//! gradient, pulling the local iterate toward the broadcast model.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Samples;
use crate::error::{Error, Result};
use crate::evaluation::{self, ConvergenceDiag};
use crate::model::{grad, GradientVec, ModelParams};
use crate::partition::ClientDataset;
use crate::rng;

/// Bytes per transmitted coordinate (32-bit floats on the wire).
pub const BYTES_PER_PARAM: u64 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FedConfig {
    pub rounds: usize,
    pub local_epochs: usize,
    pub batch_size: usize,
    pub mu: f64,
    pub lr0: f64,
    pub lr_decay: f64,
    pub lr_decay_every: usize,
    pub lr_min: f64,
    pub seed: u64,
}

impl Default for FedConfig {
    fn default() -> Self {
        FedConfig {
            rounds: 30,
            local_epochs: 5,
            batch_size: 32,
            mu: 0.05,
            lr0: 0.1,
            lr_decay: 0.95,
            lr_decay_every: 10,
            lr_min: 0.001,
            seed: 42,
        }
    }
}

impl FedConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(format!("fed: {m}")));
        if self.rounds == 0 || self.local_epochs == 0 || self.batch_size == 0 {
            return fail("rounds, local_epochs and batch_size must be positive");
        }
        if self.lr_decay_every == 0 {
            return fail("lr_decay_every must be positive");
        }
        if !(self.lr0 > 0.0 && self.lr_min > 0.0 && self.lr_min <= self.lr0) {
            return fail("need 0 < lr_min <= lr0");
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return fail("lr_decay must lie in (0, 1]");
        }
        if !(self.mu >= 0.0) || !self.mu.is_finite() {
            return fail("mu must be a finite nonnegative number");
        }
        Ok(())
    }
}

/// Step schedule: `max(lr_min, lr0 * lr_decay^(round / lr_decay_every))`
/// for a 0-based round.
pub fn learning_rate(cfg: &FedConfig, round: usize) -> f64 {
    let steps = (round / cfg.lr_decay_every) as i32;
    (cfg.lr0 * cfg.lr_decay.powi(steps)).max(cfg.lr_min)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    FedAvg,
    /// Uses `FedConfig::mu`.
    FedProx,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundTelemetry {
    /// 1-based.
    pub round: usize,
    pub global_accuracy: f64,
    pub per_client_accuracy: Vec<f64>,
    /// `||w^{t+1} - w^t||` over weights and bias.
    pub weight_delta_l2: f64,
    pub lr: f64,
    pub bytes_up: u64,
    pub bytes_down: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FedRunResult {
    pub final_params: ModelParams,
    pub telemetry: Vec<RoundTelemetry>,
    pub total_bytes: u64,
}

impl FedRunResult {
    pub fn convergence(&self) -> Result<ConvergenceDiag> {
        let acc: Vec<f64> = self.telemetry.iter().map(|t| t.global_accuracy).collect();
        let delta: Vec<f64> = self.telemetry.iter().map(|t| t.weight_delta_l2).collect();
        evaluation::convergence_rounds(&acc, &delta)
    }
}

/// Runs `epochs` passes of shuffled minibatches over `data`, handing each
/// batch (as indices) to `step`. The last batch of an epoch may be short.
pub(crate) fn for_each_minibatch<R: Rng>(
    n: usize,
    epochs: usize,
    batch_size: usize,
    rng: &mut R,
    mut step: impl FnMut(usize, &[usize]),
) {
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..epochs {
        order.shuffle(rng);
        for batch in order.chunks(batch_size) {
            step(epoch, batch);
        }
    }
}

fn apply_step(w: &mut ModelParams, g: &GradientVec, lr: f64) {
    for (wi, gi) in w.weights.iter_mut().zip(&g.d_weights) {
        *wi -= lr * gi;
    }
    w.bias -= lr * g.d_bias;
}

/// Plain local SGD starting from the broadcast model (the FedAvg client).
pub fn fedavg_client_update<R: Rng>(
    global: &ModelParams,
    cfg: &FedConfig,
    lr: f64,
    data: &Samples,
    rng: &mut R,
) -> ModelParams {
    let mut w = global.clone();
    for_each_minibatch(data.len(), cfg.local_epochs, cfg.batch_size, rng, |_, batch| {
        let g = grad(&w, data.select(batch));
        apply_step(&mut w, &g, lr);
    });
    w
}

/// Proximal local SGD from an arbitrary `start`, anchored at `anchor`.
/// `observe` sees the iterate after every step.
#[allow(clippy::too_many_arguments)]
pub fn proximal_local_training<R: Rng>(
    start: ModelParams,
    anchor: &ModelParams,
    mu: f64,
    cfg: &FedConfig,
    lr: f64,
    data: &Samples,
    rng: &mut R,
    mut observe: impl FnMut(&ModelParams),
) -> ModelParams {
    let mut w = start;
    for_each_minibatch(data.len(), cfg.local_epochs, cfg.batch_size, rng, |_, batch| {
        let mut g = grad(&w, data.select(batch));
        for ((gi, wi), ai) in g.d_weights.iter_mut().zip(&w.weights).zip(&anchor.weights) {
            *gi += mu * (wi - ai);
        }
        g.d_bias += mu * (w.bias - anchor.bias);
        apply_step(&mut w, &g, lr);
        observe(&w);
    });
    w
}

/// The FedProx client: proximal local SGD starting at the broadcast model,
/// with `mu` taken from `cfg`.
pub fn client_update<R: Rng>(
    global: &ModelParams,
    cfg: &FedConfig,
    lr: f64,
    data: &Samples,
    rng: &mut R,
) -> ModelParams {
    proximal_local_training(global.clone(), global, cfg.mu, cfg, lr, data, rng, |_| {})
}

/// Weighted mean with weights `n_k / sum(n)`, accumulated in the given order.
/// Each output coordinate is clamped to the client range, so the result is
/// always a convex combination even under rounding.
pub fn aggregate(updates: &[(ModelParams, usize)]) -> Result<ModelParams> {
    let Some((first, _)) = updates.first() else {
        return Err(Error::InvalidInput("aggregate needs at least one update".into()));
    };
    let dim = first.dim();
    if let Some((p, _)) = updates.iter().find(|(p, _)| p.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: p.dim(),
        });
    }
    if updates.iter().any(|&(_, n)| n == 0) {
        return Err(Error::InvalidInput("client sample counts must be positive".into()));
    }

    let mut acc = ModelParams::zeros(dim);
    let mut lo = first.to_flat();
    let mut hi = lo.clone();
    let mut seen = 0usize;
    for (p, n) in updates {
        seen += n;
        let frac = *n as f64 / seen as f64;
        for (a, w) in acc.weights.iter_mut().zip(&p.weights) {
            *a += frac * (w - *a);
        }
        acc.bias += frac * (p.bias - acc.bias);
        for (i, v) in p.to_flat().into_iter().enumerate() {
            lo[i] = lo[i].min(v);
            hi[i] = hi[i].max(v);
        }
    }
    for (i, a) in acc.weights.iter_mut().enumerate() {
        *a = a.clamp(lo[i], hi[i]);
    }
    acc.bias = acc.bias.clamp(lo[dim], hi[dim]);
    Ok(acc)
}

/// Pooled test set of all clients (in the given order) plus per-client tests.
pub(crate) struct EvalSets<'a> {
    pub pooled: Samples,
    pub per_client: Vec<&'a Samples>,
}

impl<'a> EvalSets<'a> {
    pub fn new(clients: &'a [ClientDataset]) -> Self {
        EvalSets {
            pooled: Samples::concat(clients.iter().map(|c| &c.split.test)),
            per_client: clients.iter().map(|c| &c.split.test).collect(),
        }
    }
}

pub fn run_federated(clients: &[ClientDataset], cfg: &FedConfig, algorithm: Algorithm) -> Result<FedRunResult> {
    cfg.validate()?;
    let first = clients
        .first()
        .ok_or_else(|| Error::InvalidInput("federated training needs at least one client".into()))?;
    if let Some(c) = clients.iter().find(|c| c.split.train.is_empty()) {
        return Err(Error::InvalidInput(format!(
            "client {:?} has an empty train split",
            c.name
        )));
    }
    let dim = first.split.train.dim();
    let payload = payload_bytes(dim);
    let k = clients.len() as u64;
    let eval = EvalSets::new(clients);

    let mut global = ModelParams::zeros(dim);
    let mut telemetry = Vec::with_capacity(cfg.rounds);
    for round in 0..cfg.rounds {
        let lr = learning_rate(cfg, round);
        let updates: Vec<(ModelParams, usize)> = clients
            .iter()
            .map(|c| {
                let mut rng = rng::stream(cfg.seed, &[rng::TAG_FEDERATED, round as u64, u64::from(c.client_id)]);
                let local = match algorithm {
                    Algorithm::FedAvg => fedavg_client_update(&global, cfg, lr, &c.split.train, &mut rng),
                    Algorithm::FedProx => client_update(&global, cfg, lr, &c.split.train, &mut rng),
                };
                (local, c.split.train.len())
            })
            .collect();
        let next = aggregate(&updates)?;
        if !next.is_finite() {
            return Err(Error::InvalidInput(format!(
                "global model diverged to non-finite values at round {}",
                round + 1
            )));
        }
        let weight_delta_l2 = next.distance(&global);
        global = next;

        let (global_accuracy, per_client_accuracy) = evaluation::global_and_client_accuracy(&global, &eval)?;
        telemetry.push(RoundTelemetry {
            round: round + 1,
            global_accuracy,
            per_client_accuracy,
            weight_delta_l2,
            lr,
            bytes_up: k * payload,
            bytes_down: k * payload,
        });
    }
    let total_bytes = telemetry.iter().map(|t| t.bytes_up + t.bytes_down).sum();
    Ok(FedRunResult {
        final_params: global,
        telemetry,
        total_bytes,
    })
}

pub fn payload_bytes(dim: usize) -> u64 {
    (dim as u64 + 1) * BYTES_PER_PARAM
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CommunicationBytes {
    /// One model (weights + bias) as 32-bit floats.
    pub payload_bytes: u64,
    /// Client-to-server model uploads over the whole run.
    pub bytes_up: u64,
    /// Server-to-client broadcasts over the whole run.
    pub bytes_down: u64,
    /// Raw model traffic: one trained model per client per round.
    pub bytes_raw: u64,
    /// `bytes_raw * (1 + overhead_factor)`.
    pub bytes_reported: f64,
}

pub fn communication_bytes(dim: usize, clients: usize, rounds: usize, overhead_factor: f64) -> CommunicationBytes {
    let payload = payload_bytes(dim);
    let per_direction = rounds as u64 * clients as u64 * payload;
    CommunicationBytes {
        payload_bytes: payload,
        bytes_up: per_direction,
        bytes_down: per_direction,
        bytes_raw: per_direction,
        bytes_reported: per_direction as f64 * (1.0 + overhead_factor),
    }
}
