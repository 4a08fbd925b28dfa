//! Deterministic, single-process federated-learning simulator.
//!
//! The crate covers the whole experimental pipeline for the Cleveland heart
//! disease study:
//!
//! * [`data`] loads and cleans the raw file and provides per-client
//!   standardization and stratified splitting.
//! * [`partition`] synthesizes non-IID hospital clients from age windows.
//! * [`heterogeneity`] quantifies how non-IID those clients are.
//! * [`model`] holds the logistic-regression primitives.
//! * [`federation`] is the round-based FedAvg / FedProx engine.
//! * [`baselines`] trains the centralized and local-only comparison models.
//! * [`evaluation`] and [`stats`] compute metrics and significance tests.
//! * [`experiment`] and [`report`] orchestrate seed sweeps and write reports.
//!
//! Every randomized step takes an explicit seed, so a config file fully
//! determines the emitted report.

// `!(x >= 0.0)` guards are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod federation;
pub mod heterogeneity;
pub mod model;
pub mod partition;
pub mod report;
pub mod rng;
pub mod stats;
pub mod synthetic;

pub use baselines::{train_centralized, train_local_only, BaselineKind, BaselineResult, TrainSchedule};
pub use data::{
    apply_standardizer, fit_standardizer, load_cleveland, parse_cleveland, stratified_split, PatientRecord, RawDataset,
    Samples, SplitDataset, StandardizationParams, CONTINUOUS_MASK, FEATURE_NAMES, NUM_FEATURES,
};
pub use error::{Error, Result};
pub use evaluation::{
    accuracy, auc_roc, convergence_rounds, f1_score, fairness_table, ConvergenceDiag, FairnessTable, MetricSummary,
};
pub use experiment::{
    run_experiment, ExperimentConfig, ExperimentOutcome, ExperimentReport, Plan, Regime, Seeds, ValidationProtocol,
};
pub use federation::{
    aggregate, client_update, communication_bytes, fedavg_client_update, learning_rate, run_federated, Algorithm,
    CommunicationBytes, FedConfig, FedRunResult, RoundTelemetry,
};
pub use heterogeneity::{gaussian_mmd, gini_coefficient, jensen_shannon, HeterogeneityReport};
pub use model::{grad, l2_regularized_grad, loss, predict_proba, sigmoid, GradientVec, ModelParams};
pub use partition::{partition_by_age, prepare_clients, summarize_clients, ClientDataset, WindowSpec};
pub use stats::{bonferroni, cohens_d, summarize, t_test, RunSeries, Tail, TestResult};
