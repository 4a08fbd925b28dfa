//! Synthesizes non-IID hospital clients from a single cleaned dataset.
//!
//! Records are sorted by age (stable on file order) and each client draws a
//! seeded subsample without replacement from its own percentile window.
//! Windows overlap, so a patient may belong to several clients.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::data::{
    apply_standardizer, fit_standardizer, stratified_split, PatientRecord, RawDataset, Samples, SplitDataset,
    StandardizationParams, CONTINUOUS_MASK,
};
use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_TEST_FRACTION: f64 = 0.20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub client_name: String,
    pub lo_percentile: f64,
    pub hi_percentile: f64,
    pub target_count: usize,
}

impl WindowSpec {
    pub fn new(name: &str, lo: f64, hi: f64, target_count: usize) -> Self {
        WindowSpec {
            client_name: name.to_string(),
            lo_percentile: lo,
            hi_percentile: hi,
            target_count,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok_range = (0.0..=1.0).contains(&self.lo_percentile)
            && (0.0..=1.0).contains(&self.hi_percentile)
            && self.lo_percentile < self.hi_percentile;
        if !ok_range {
            return Err(Error::Config(format!(
                "client {:?}: percentile window [{}, {}] is not an increasing range inside [0, 1]",
                self.client_name, self.lo_percentile, self.hi_percentile
            )));
        }
        if self.target_count == 0 {
            return Err(Error::Config(format!(
                "client {:?}: target_count must be positive",
                self.client_name
            )));
        }
        Ok(())
    }

    /// Half-open range of age-sorted positions covered by the window.
    pub fn slice_bounds(&self, population: usize) -> (usize, usize) {
        let n = population as f64;
        let start = snap(self.lo_percentile * n).floor() as usize;
        let end = (snap(self.hi_percentile * n).ceil() as usize).min(population);
        (start.min(end), end)
    }
}

// Removes float noise like 0.7 * 10 = 7.000000000000001 before floor/ceil.
fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        r
    } else {
        x
    }
}

/// The four hospital windows: oldest 60% -> 95, 30th-70th -> 83,
/// 20th-50th -> 44, youngest 40% -> 71.
pub fn default_window_specs() -> Vec<WindowSpec> {
    vec![
        WindowSpec::new("Client 1 (Older)", 0.40, 1.00, 95),
        WindowSpec::new("Client 2 (Middle)", 0.30, 0.70, 83),
        WindowSpec::new("Client 3 (Small)", 0.20, 0.50, 44),
        WindowSpec::new("Client 4 (Younger)", 0.00, 0.40, 71),
    ]
}

/// A client's membership before splitting and standardization.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientPartition {
    /// 1-based, in spec order.
    pub client_id: u32,
    pub name: String,
    /// Indices into `RawDataset::records`, in ascending age order.
    pub member_indices: Vec<usize>,
    pub records: Vec<PatientRecord>,
}

impl ClientPartition {
    pub fn sample_count(&self) -> usize {
        self.records.len()
    }

    pub fn mean_age(&self) -> f64 {
        mean(self.records.iter().map(|r| r.age))
    }

    pub fn age_std(&self) -> f64 {
        population_std(self.records.iter().map(|r| r.age))
    }

    pub fn disease_rate(&self) -> f64 {
        mean(self.records.iter().map(|r| f64::from(r.label)))
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

fn population_std(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = mean(values.clone());
    mean(values.map(|v| (v - m).powi(2))).sqrt()
}

pub fn partition_by_age(raw: &RawDataset, specs: &[WindowSpec], seed: u64) -> Result<Vec<ClientPartition>> {
    if specs.is_empty() {
        return Err(Error::Config("at least one window spec is required".into()));
    }
    let mut order: Vec<usize> = (0..raw.records.len()).collect();
    // stable: ties keep file order
    order.sort_by(|&a, &b| raw.records[a].age.total_cmp(&raw.records[b].age));

    specs
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            spec.validate()?;
            let client_id = i as u32 + 1;
            let (start, end) = spec.slice_bounds(order.len());
            let window = &order[start..end];
            if spec.target_count > window.len() {
                return Err(Error::Config(format!(
                    "client {:?}: target_count {} exceeds its window population {}",
                    spec.client_name,
                    spec.target_count,
                    window.len()
                )));
            }
            let mut rng = rng::stream(seed, &[rng::TAG_PARTITION, u64::from(client_id)]);
            let mut picked = index::sample(&mut rng, window.len(), spec.target_count).into_vec();
            picked.sort_unstable();
            let member_indices: Vec<usize> = picked.iter().map(|&p| window[p]).collect();
            Ok(ClientPartition {
                client_id,
                name: spec.client_name.clone(),
                records: member_indices.iter().map(|&m| raw.records[m]).collect(),
                member_indices,
            })
        })
        .collect()
}

/// One simulated hospital, split and standardized with its own statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientDataset {
    pub client_id: u32,
    pub name: String,
    /// Standardized with `standardizer`.
    pub split: SplitDataset,
    /// Same split before standardization.
    pub raw_split: SplitDataset,
    pub standardizer: StandardizationParams,
    pub member_indices: Vec<usize>,
    pub sample_count: usize,
    pub mean_age: f64,
    pub age_std: f64,
    /// Over all of the client's samples, before splitting.
    pub disease_rate: f64,
}

impl ClientDataset {
    /// Train and test rows together, standardized.
    pub fn all_standardized(&self) -> Samples {
        Samples::concat([&self.split.train, &self.split.test])
    }
}

/// Stratified split per client (seeded by `(seed, client_id)`), then a
/// standardizer fitted on that client's training rows only.
pub fn prepare_clients(partitions: &[ClientPartition], test_fraction: f64, seed: u64) -> Result<Vec<ClientDataset>> {
    partitions
        .iter()
        .map(|p| {
            let samples = Samples::from_records(&p.records);
            let split_seed = rng::derive_seed(seed, &[rng::TAG_SPLIT, u64::from(p.client_id)]);
            let raw_split = stratified_split(&samples, test_fraction, split_seed)
                .map_err(|e| Error::Config(format!("client {:?}: {e}", p.name)))?;
            let standardizer = fit_standardizer(&raw_split.train.features, &CONTINUOUS_MASK)?;
            if !standardizer.degenerate_features.is_empty() {
                log::warn!(
                    "client {:?}: zero-variance training features {:?}",
                    p.name,
                    standardizer.degenerate_features
                );
            }
            let mut split = raw_split.clone();
            split.train.features = apply_standardizer(&raw_split.train.features, &standardizer)?;
            split.test.features = apply_standardizer(&raw_split.test.features, &standardizer)?;
            Ok(ClientDataset {
                client_id: p.client_id,
                name: p.name.clone(),
                split,
                raw_split,
                standardizer,
                member_indices: p.member_indices.clone(),
                sample_count: p.sample_count(),
                mean_age: p.mean_age(),
                age_std: p.age_std(),
                disease_rate: p.disease_rate(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClientSummary {
    pub client_id: u32,
    pub name: String,
    pub samples: usize,
    pub mean_age: f64,
    pub age_std: f64,
    pub disease_rate: f64,
}

/// Per-client rows plus ranges across clients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClientSummaryTable {
    pub clients: Vec<ClientSummary>,
    /// Largest over smallest sample count.
    pub size_ratio: f64,
    pub age_span_years: f64,
    pub prevalence_span_pp: f64,
}

pub fn summarize_clients(clients: &[ClientDataset]) -> ClientSummaryTable {
    let rows: Vec<ClientSummary> = clients
        .iter()
        .map(|c| ClientSummary {
            client_id: c.client_id,
            name: c.name.clone(),
            samples: c.sample_count,
            mean_age: c.mean_age,
            age_std: c.age_std,
            disease_rate: c.disease_rate,
        })
        .collect();
    let span = |f: fn(&ClientSummary) -> f64| {
        let (lo, hi) = rows
            .iter()
            .map(f)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        if rows.is_empty() {
            (0.0, 0.0)
        } else {
            (lo, hi)
        }
    };
    let (n_lo, n_hi) = span(|r| r.samples as f64);
    let (a_lo, a_hi) = span(|r| r.mean_age);
    let (p_lo, p_hi) = span(|r| r.disease_rate);
    ClientSummaryTable {
        size_ratio: if n_lo > 0.0 { n_hi / n_lo } else { 0.0 },
        age_span_years: a_hi - a_lo,
        prevalence_span_pp: (p_hi - p_lo) * 100.0,
        clients: rows,
    }
}
