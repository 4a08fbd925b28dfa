//! Experiment configuration and orchestration: seed sweeps, the mu grid,
//! the hold-out validation protocol and the aggregated report.
//!
//! Individual runs depend only on `(config, seed, mu)`. They execute on a
//! rayon pool of `workers` threads and are gathered back in (mu, seed)
//! order, so the report does not depend on scheduling.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{train_centralized, train_local_only, DEFAULT_LAMBDA};
use crate::data::{load_cleveland, RawDataset};
use crate::error::{Error, Result};
use crate::evaluation::{self, fairness_table, FairnessTable, MetricSummary, THRESHOLD};
use crate::federation::{communication_bytes, run_federated, Algorithm, CommunicationBytes, FedConfig, RoundTelemetry};
use crate::heterogeneity::{heterogeneity_report, HeterogeneityReport};
use crate::model::predict_proba;
use crate::partition::{
    default_window_specs, partition_by_age, prepare_clients, summarize_clients, ClientDataset, ClientSummaryTable,
    WindowSpec, DEFAULT_TEST_FRACTION,
};
use crate::stats::{bonferroni, mean_std_lenient, t_test, RunSeries, Tail, TestResult};

/// Environment variable overriding `ExperimentConfig::workers`.
pub const WORKERS_ENV: &str = "FEDSIM_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Centralized,
    Local,
    FedAvg,
    FedProx,
}

impl Regime {
    pub const ALL: [Regime; 4] = [Regime::Centralized, Regime::Local, Regime::FedAvg, Regime::FedProx];

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Centralized => "centralized",
            Regime::Local => "local",
            Regime::FedAvg => "fedavg",
            Regime::FedProx => "fedprox",
        }
    }

    pub fn is_federated(self) -> bool {
        matches!(self, Regime::FedAvg | Regime::FedProx)
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "centralized" => Ok(Regime::Centralized),
            "local" | "local_only" => Ok(Regime::Local),
            "fedavg" => Ok(Regime::FedAvg),
            "fedprox" => Ok(Regime::FedProx),
            other => Err(Error::Config(format!("unknown regime {other:?}"))),
        }
    }
}

/// Either an inclusive range or an explicit list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    Range { first: u64, last: u64 },
    List(Vec<u64>),
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds::Range { first: 42, last: 91 }
    }
}

impl Seeds {
    pub fn to_vec(&self) -> Vec<u64> {
        match self {
            Seeds::Range { first, last } => (*first..=*last).collect(),
            Seeds::List(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Relative paths resolve against the working directory.
    pub data_path: String,
    pub window_specs: Vec<WindowSpec>,
    /// Fixes client membership and train/test splits for every run.
    pub partition_seed: u64,
    pub test_fraction: f64,
    /// `fed.seed` is ignored; each run takes its seed from `seeds`.
    pub fed: FedConfig,
    pub mu_grid: Vec<f64>,
    pub seeds: Seeds,
    pub regimes: Vec<Regime>,
    /// L2 coefficient for the centralized and local baselines.
    pub lambda: f64,
    pub overhead_factor: f64,
    /// Pick the FedProx mu with the hold-out protocol; otherwise use `fed.mu`.
    pub select_mu_by_validation: bool,
    /// Hold-out client id; defaults to the largest client.
    pub validation_holdout: Option<u32>,
    pub centralized_restandardize: bool,
    pub alpha: f64,
    pub workers: usize,
    pub output_dir: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data_path: "data/processed.cleveland.data".into(),
            window_specs: default_window_specs(),
            partition_seed: 42,
            test_fraction: DEFAULT_TEST_FRACTION,
            fed: FedConfig::default(),
            mu_grid: vec![0.0, 0.01, 0.05, 0.1, 0.5],
            seeds: Seeds::default(),
            regimes: Regime::ALL.to_vec(),
            lambda: DEFAULT_LAMBDA,
            overhead_factor: 0.0,
            select_mu_by_validation: true,
            validation_holdout: None,
            centralized_restandardize: false,
            alpha: 0.05,
            workers: 1,
            output_dir: "out".into(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.fed.validate()?;
        let seeds = self.seeds.to_vec();
        if seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        if self.mu_grid.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
            return Err(Error::Config("mu_grid values must be finite and >= 0".into()));
        }
        if !(self.lambda >= 0.0) || !(self.overhead_factor >= 0.0) {
            return Err(Error::Config("lambda and overhead_factor must be >= 0".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config("alpha must lie in (0, 1)".into()));
        }
        if self.window_specs.is_empty() {
            return Err(Error::Config("window_specs must not be empty".into()));
        }
        Ok(())
    }

    /// Worker count after applying the environment override.
    pub fn effective_workers(&self) -> usize {
        std::env::var(WORKERS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .unwrap_or(self.workers)
            .max(1)
    }

    fn fed_for(&self, seed: u64, mu: f64) -> FedConfig {
        FedConfig {
            seed,
            mu,
            ..self.fed.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationProtocol {
    pub holdout_client_id: u32,
    pub train_client_ids: Vec<u32>,
}

impl ValidationProtocol {
    /// Hold out `holdout` or, when `None`, the largest client (lowest id on
    /// ties).
    pub fn new(clients: &[ClientDataset], holdout: Option<u32>) -> Result<Self> {
        if clients.len() < 2 {
            return Err(Error::Config("the validation protocol needs at least 2 clients".into()));
        }
        let holdout_client_id = match holdout {
            Some(id) => {
                if !clients.iter().any(|c| c.client_id == id) {
                    return Err(Error::Config(format!("validation holdout {id} is not a client id")));
                }
                id
            }
            None => {
                clients
                    .iter()
                    .max_by(|a, b| a.sample_count.cmp(&b.sample_count).then(b.client_id.cmp(&a.client_id)))
                    .expect("non-empty")
                    .client_id
            }
        };
        Ok(ValidationProtocol {
            holdout_client_id,
            train_client_ids: clients
                .iter()
                .map(|c| c.client_id)
                .filter(|&id| id != holdout_client_id)
                .collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetInfo {
    pub source_path: String,
    pub raw_rows: usize,
    pub retained_rows: usize,
    pub dropped_count: usize,
    pub prevalence: f64,
}

impl DatasetInfo {
    pub fn from_raw(raw: &RawDataset) -> Self {
        DatasetInfo {
            source_path: raw.source_path.clone(),
            raw_rows: raw.raw_rows(),
            retained_rows: raw.records.len(),
            dropped_count: raw.dropped_count,
            prevalence: raw.prevalence(),
        }
    }
}

/// Loaded data, clients and their heterogeneity; the input to every run.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub raw: RawDataset,
    pub clients: Vec<ClientDataset>,
    pub summary: ClientSummaryTable,
    pub heterogeneity: HeterogeneityReport,
}

pub fn prepare_data(cfg: &ExperimentConfig) -> Result<PreparedData> {
    let raw = load_cleveland(&cfg.data_path)?;
    prepare_from_raw(cfg, raw)
}

pub fn prepare_from_raw(cfg: &ExperimentConfig, raw: RawDataset) -> Result<PreparedData> {
    let partitions = partition_by_age(&raw, &cfg.window_specs, cfg.partition_seed)?;
    let clients = prepare_clients(&partitions, cfg.test_fraction, cfg.partition_seed)?;
    let summary = summarize_clients(&clients);
    let heterogeneity = heterogeneity_report(&clients)?;
    Ok(PreparedData {
        raw,
        clients,
        summary,
        heterogeneity,
    })
}

/// Outcome of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub regime: Regime,
    pub mu: Option<f64>,
    pub seed: u64,
    pub metrics: MetricSummary,
    pub rounds_to_95pct: Option<usize>,
    pub avg_weight_delta: Option<f64>,
    pub telemetry: Option<Vec<RoundTelemetry>>,
    pub seconds: f64,
}

fn run_one(cfg: &ExperimentConfig, clients: &[ClientDataset], regime: Regime, mu: f64, seed: u64) -> Result<RunRecord> {
    let start = Instant::now();
    let fed = cfg.fed_for(seed, mu);
    let mut rec = match regime {
        Regime::FedAvg | Regime::FedProx => {
            let algorithm = if regime == Regime::FedAvg {
                Algorithm::FedAvg
            } else {
                Algorithm::FedProx
            };
            let result = run_federated(clients, &fed, algorithm)?;
            let diag = result.convergence()?;
            let metrics =
                evaluation::summarize_global(&result.final_params, &crate::federation::EvalSets::new(clients))?;
            RunRecord {
                regime,
                mu: Some(if regime == Regime::FedAvg { 0.0 } else { mu }),
                seed,
                metrics,
                rounds_to_95pct: Some(diag.rounds_to_95pct),
                avg_weight_delta: Some(diag.avg_weight_delta),
                telemetry: Some(result.telemetry),
                seconds: 0.0,
            }
        }
        Regime::Centralized | Regime::Local => {
            let result = if regime == Regime::Centralized {
                train_centralized(clients, &fed, cfg.lambda, cfg.centralized_restandardize)?
            } else {
                train_local_only(clients, &fed, cfg.lambda)?
            };
            RunRecord {
                regime,
                mu: None,
                seed,
                metrics: result.metrics,
                rounds_to_95pct: None,
                avg_weight_delta: None,
                telemetry: None,
                seconds: 0.0,
            }
        }
    };
    rec.seconds = start.elapsed().as_secs_f64();
    Ok(rec)
}

fn run_pool<T: Send, F>(workers: usize, jobs: usize, f: F) -> Result<Vec<T>>
where
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    if workers <= 1 {
        return (0..jobs).map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    pool.install(|| (0..jobs).into_par_iter().map(&f).collect())
}

/// Federated, centralized or local runs for every seed, in seed order.
pub fn run_regime(
    cfg: &ExperimentConfig,
    clients: &[ClientDataset],
    regime: Regime,
    mu: f64,
) -> Result<Vec<RunRecord>> {
    let seeds = cfg.seeds.to_vec();
    run_pool(cfg.effective_workers(), seeds.len(), |i| {
        run_one(cfg, clients, regime, mu, seeds[i])
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeSummary {
    pub regime: Regime,
    pub method: String,
    pub mu: Option<f64>,
    pub runs: usize,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub auc_mean: f64,
    pub auc_std: f64,
    pub f1_mean: f64,
    pub f1_std: f64,
    /// Mean over seeds of the per-run cross-client accuracy std.
    pub fairness_std_mean: f64,
    pub fairness_std_std: f64,
    /// Seed-averaged accuracy on each client's test split.
    pub per_client_accuracy_mean: Vec<f64>,
    pub convergence_rounds_mean: Option<f64>,
    pub convergence_rounds_std: Option<f64>,
    pub weight_delta_mean: Option<f64>,
    pub weight_delta_std: Option<f64>,
    pub comm_bytes_raw: u64,
    pub comm_bytes_reported: f64,
    pub comm_mb: f64,
}

fn column(runs: &[RunRecord], f: impl Fn(&RunRecord) -> f64) -> Vec<f64> {
    runs.iter().map(f).collect()
}

fn method_label(regime: Regime, mu: Option<f64>) -> String {
    match regime {
        Regime::Centralized => "Centralized".into(),
        Regime::Local => "Avg Local-Only".into(),
        Regime::FedAvg => "FedAvg (mu=0)".into(),
        Regime::FedProx => format!("FedProx (mu={})", mu.unwrap_or(0.0)),
    }
}

fn summarize_runs(regime: Regime, mu: Option<f64>, runs: &[RunRecord], comm: &CommunicationBytes) -> RegimeSummary {
    let (accuracy_mean, accuracy_std) = mean_std_lenient(&column(runs, |r| r.metrics.accuracy));
    let (auc_mean, auc_std) = mean_std_lenient(&column(runs, |r| r.metrics.auc_roc));
    let (f1_mean, f1_std) = mean_std_lenient(&column(runs, |r| r.metrics.f1));
    let (fairness_std_mean, fairness_std_std) = mean_std_lenient(&column(runs, |r| r.metrics.fairness_std));
    let k = runs.first().map_or(0, |r| r.metrics.per_client_accuracy.len());
    let per_client_accuracy_mean = (0..k)
        .map(|j| mean_std_lenient(&column(runs, |r| r.metrics.per_client_accuracy[j])).0)
        .collect();
    let conv = regime
        .is_federated()
        .then(|| mean_std_lenient(&column(runs, |r| r.rounds_to_95pct.unwrap_or(0) as f64)));
    let delta = regime
        .is_federated()
        .then(|| mean_std_lenient(&column(runs, |r| r.avg_weight_delta.unwrap_or(0.0))));
    let (raw, reported) = if regime.is_federated() {
        (comm.bytes_raw, comm.bytes_reported)
    } else {
        (0, 0.0)
    };
    RegimeSummary {
        regime,
        method: method_label(regime, mu),
        mu,
        runs: runs.len(),
        accuracy_mean,
        accuracy_std,
        auc_mean,
        auc_std,
        f1_mean,
        f1_std,
        fairness_std_mean,
        fairness_std_std,
        per_client_accuracy_mean,
        convergence_rounds_mean: conv.map(|c| c.0),
        convergence_rounds_std: conv.map(|c| c.1),
        weight_delta_mean: delta.map(|d| d.0),
        weight_delta_std: delta.map(|d| d.1),
        comm_bytes_raw: raw,
        comm_bytes_reported: reported,
        comm_mb: reported / 1e6,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub mu: f64,
    pub runs: usize,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub convergence_rounds_mean: f64,
    pub convergence_rounds_std: f64,
    pub weight_delta_mean: f64,
    pub fairness_std_mean: f64,
}

/// Per-mu FedProx sweep result, with the runs kept for telemetry emission.
#[derive(Debug, Clone)]
pub struct AblationResult {
    pub rows: Vec<AblationRow>,
    pub runs: Vec<Vec<RunRecord>>,
}

pub fn run_ablation(cfg: &ExperimentConfig, clients: &[ClientDataset]) -> Result<AblationResult> {
    if cfg.mu_grid.is_empty() {
        return Err(Error::Config("mu_grid must not be empty for the ablation".into()));
    }
    let seeds = cfg.seeds.to_vec();
    let jobs: Vec<(f64, u64)> = cfg
        .mu_grid
        .iter()
        .flat_map(|&mu| seeds.iter().map(move |&s| (mu, s)))
        .collect();
    let flat = run_pool(cfg.effective_workers(), jobs.len(), |i| {
        run_one(cfg, clients, Regime::FedProx, jobs[i].0, jobs[i].1)
    })?;
    let runs: Vec<Vec<RunRecord>> = flat.chunks(seeds.len()).map(<[RunRecord]>::to_vec).collect();
    let rows = cfg
        .mu_grid
        .iter()
        .zip(&runs)
        .map(|(&mu, rs)| {
            let (accuracy_mean, accuracy_std) = mean_std_lenient(&column(rs, |r| r.metrics.accuracy));
            let (convergence_rounds_mean, convergence_rounds_std) =
                mean_std_lenient(&column(rs, |r| r.rounds_to_95pct.unwrap_or(0) as f64));
            AblationRow {
                mu,
                runs: rs.len(),
                accuracy_mean,
                accuracy_std,
                convergence_rounds_mean,
                convergence_rounds_std,
                weight_delta_mean: mean_std_lenient(&column(rs, |r| r.avg_weight_delta.unwrap_or(0.0))).0,
                fairness_std_mean: mean_std_lenient(&column(rs, |r| r.metrics.fairness_std)).0,
            }
        })
        .collect();
    Ok(AblationResult { rows, runs })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationRow {
    pub mu: f64,
    pub runs: usize,
    pub holdout_accuracy_mean: f64,
    pub holdout_accuracy_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub protocol: ValidationProtocol,
    pub rows: Vec<ValidationRow>,
    pub selected_mu: f64,
}

/// Trains FedProx on the non-holdout clients for each mu and seed and scores
/// the global model on every sample of the holdout client. The mu with the
/// best mean holdout accuracy wins; ties go to the smaller mu.
pub fn run_validation_protocol(
    cfg: &ExperimentConfig,
    clients: &[ClientDataset],
    protocol: &ValidationProtocol,
) -> Result<ValidationReport> {
    if cfg.mu_grid.is_empty() {
        return Err(Error::Config("mu_grid must not be empty for validation".into()));
    }
    let holdout = clients
        .iter()
        .find(|c| c.client_id == protocol.holdout_client_id)
        .ok_or_else(|| Error::Config("holdout client not found".into()))?;
    let holdout_samples = holdout.all_standardized();
    let train: Vec<ClientDataset> = clients
        .iter()
        .filter(|c| protocol.train_client_ids.contains(&c.client_id))
        .cloned()
        .collect();
    let seeds = cfg.seeds.to_vec();
    let jobs: Vec<(f64, u64)> = cfg
        .mu_grid
        .iter()
        .flat_map(|&mu| seeds.iter().map(move |&s| (mu, s)))
        .collect();
    let acc = run_pool(cfg.effective_workers(), jobs.len(), |i| {
        let (mu, seed) = jobs[i];
        let result = run_federated(&train, &cfg.fed_for(seed, mu), Algorithm::FedProx)?;
        let probs = predict_proba(&result.final_params, &holdout_samples.features)?;
        evaluation::accuracy(&probs, &holdout_samples.labels, THRESHOLD)
    })?;
    let rows: Vec<ValidationRow> = cfg
        .mu_grid
        .iter()
        .zip(acc.chunks(seeds.len()))
        .map(|(&mu, a)| {
            let (m, s) = mean_std_lenient(a);
            ValidationRow {
                mu,
                runs: a.len(),
                holdout_accuracy_mean: m,
                holdout_accuracy_std: s,
            }
        })
        .collect();
    let selected_mu = select_mu(&rows);
    Ok(ValidationReport {
        protocol: protocol.clone(),
        rows,
        selected_mu,
    })
}

fn select_mu(rows: &[ValidationRow]) -> f64 {
    let mut best = &rows[0];
    for r in &rows[1..] {
        let better = r.holdout_accuracy_mean > best.holdout_accuracy_mean;
        let tie_smaller = r.holdout_accuracy_mean == best.holdout_accuracy_mean && r.mu < best.mu;
        if better || tie_smaller {
            best = r;
        }
    }
    best.mu
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    pub metric: String,
    pub one_sided: Option<TestResult>,
    pub two_sided: Option<TestResult>,
    pub significant: Option<bool>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatisticalTests {
    pub alpha: f64,
    pub comparisons: usize,
    pub corrected_alpha: f64,
    pub tests: Vec<Comparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvironmentStamp {
    pub package: String,
    pub version: String,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub environment: EnvironmentStamp,
    pub dataset: DatasetInfo,
    pub clients: ClientSummaryTable,
    pub heterogeneity: HeterogeneityReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation: Option<ValidationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ablation: Option<Vec<AblationRow>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub regimes: Vec<RegimeSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fairness: Option<FairnessTable>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub statistical_tests: Option<StatisticalTests>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub communication: Option<CommunicationBytes>,
}

/// Which parts of the pipeline to execute.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub regimes: Vec<Regime>,
    pub ablation: bool,
    pub validation: bool,
}

impl Plan {
    /// Everything the config asks for.
    pub fn full(cfg: &ExperimentConfig) -> Self {
        let federated = cfg.regimes.iter().any(|r| r.is_federated());
        Plan {
            regimes: cfg.regimes.clone(),
            ablation: federated && !cfg.mu_grid.is_empty(),
            validation: cfg.regimes.contains(&Regime::FedProx)
                && cfg.select_mu_by_validation
                && !cfg.mu_grid.is_empty(),
        }
    }
}

/// Report plus the raw runs behind it (for telemetry files and timing).
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: ExperimentReport,
    pub runs: Vec<RunRecord>,
    pub total_seconds: f64,
}

pub fn run_experiment(cfg: &ExperimentConfig, plan: &Plan) -> Result<ExperimentOutcome> {
    let data = prepare_data(cfg)?;
    run_experiment_on(cfg, plan, &data)
}

pub fn run_experiment_on(cfg: &ExperimentConfig, plan: &Plan, data: &PreparedData) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let clients = &data.clients;
    let mut all_runs = Vec::new();

    let validation = if plan.validation {
        let protocol = ValidationProtocol::new(clients, cfg.validation_holdout)?;
        Some(run_validation_protocol(cfg, clients, &protocol)?)
    } else {
        None
    };
    let fedprox_mu = validation.as_ref().map_or(cfg.fed.mu, |v| v.selected_mu);

    let ablation = if plan.ablation {
        let result = run_ablation(cfg, clients)?;
        all_runs.extend(result.runs.into_iter().flatten());
        Some(result.rows)
    } else {
        None
    };

    let dim = clients.first().map_or(0, |c| c.split.train.dim());
    let comm = communication_bytes(dim, clients.len(), cfg.fed.rounds, cfg.overhead_factor);

    let mut regimes = Vec::new();
    let mut series: Vec<(Regime, Vec<RunRecord>)> = Vec::new();
    for &regime in &plan.regimes {
        let mu = match regime {
            Regime::FedProx => fedprox_mu,
            _ => 0.0,
        };
        let runs = run_regime(cfg, clients, regime, mu)?;
        let mu_field = regime.is_federated().then_some(mu);
        regimes.push(summarize_runs(regime, mu_field, &runs, &comm));
        series.push((regime, runs));
    }

    let find = |r: Regime| series.iter().find(|(k, _)| *k == r).map(|(_, v)| v);
    let fairness = match (find(Regime::Local), find(Regime::FedProx)) {
        (Some(local), Some(prox)) => {
            let ids: Vec<(u32, String)> = clients.iter().map(|c| (c.client_id, c.name.clone())).collect();
            let per_client = |runs: &[RunRecord]| -> Vec<f64> {
                (0..clients.len())
                    .map(|j| mean_std_lenient(&column(runs, |r| r.metrics.per_client_accuracy[j])).0)
                    .collect()
            };
            Some(fairness_table(&ids, &per_client(local), &per_client(prox))?)
        }
        _ => None,
    };

    let statistical_tests = significance(cfg, &series);
    let communication = plan.regimes.iter().any(|r| r.is_federated()).then_some(comm);

    for (_, runs) in series {
        all_runs.extend(runs);
    }

    let report = ExperimentReport {
        config: cfg.clone(),
        environment: EnvironmentStamp {
            package: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            workers: cfg.effective_workers(),
        },
        dataset: DatasetInfo::from_raw(&data.raw),
        clients: data.summary.clone(),
        heterogeneity: data.heterogeneity.clone(),
        validation,
        ablation,
        regimes,
        fairness,
        statistical_tests,
        communication,
    };
    Ok(ExperimentOutcome {
        report,
        runs: all_runs,
        total_seconds: start.elapsed().as_secs_f64(),
    })
}

fn significance(cfg: &ExperimentConfig, series: &[(Regime, Vec<RunRecord>)]) -> Option<StatisticalTests> {
    let find = |r: Regime| series.iter().find(|(k, _)| *k == r).map(|(_, v)| v);
    let prox = find(Regime::FedProx)?;
    let others: Vec<(Regime, &Vec<RunRecord>)> = [Regime::Centralized, Regime::FedAvg, Regime::Local]
        .into_iter()
        .filter_map(|r| find(r).map(|v| (r, v)))
        .collect();
    if others.is_empty() {
        return None;
    }
    let corrected_alpha = bonferroni(cfg.alpha, others.len()).ok()?;
    let to_series = |r: Regime, runs: &[RunRecord]| {
        RunSeries::new(
            r.as_str(),
            column(runs, |x| x.metrics.accuracy),
            runs.iter().map(|x| x.seed).collect(),
        )
    };
    let tests = others
        .iter()
        .map(|(r, runs)| {
            let outcome = (|| -> Result<(TestResult, TestResult)> {
                let a = to_series(Regime::FedProx, prox)?;
                let b = to_series(*r, runs)?;
                let mut one = t_test(&a, &b, Tail::OneSided)?;
                let mut two = t_test(&a, &b, Tail::TwoSided)?;
                one.corrected_alpha = corrected_alpha;
                two.corrected_alpha = corrected_alpha;
                Ok((one, two))
            })();
            match outcome {
                Ok((one, two)) => Comparison {
                    a: Regime::FedProx.as_str().into(),
                    b: r.as_str().into(),
                    metric: "accuracy".into(),
                    significant: Some(one.p_value < corrected_alpha),
                    one_sided: Some(one),
                    two_sided: Some(two),
                    error: None,
                },
                Err(e) => Comparison {
                    a: Regime::FedProx.as_str().into(),
                    b: r.as_str().into(),
                    metric: "accuracy".into(),
                    one_sided: None,
                    two_sided: None,
                    significant: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Some(StatisticalTests {
        alpha: cfg.alpha,
        comparisons: others.len(),
        corrected_alpha,
        tests,
    })
}
