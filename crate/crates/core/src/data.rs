//! Raw Cleveland file ingestion, per-client standardization and stratified
//! splitting.
//!
//! The input is the `processed.cleveland.data` layout: 14 comma-separated
//! numeric columns per row, `?` marking a missing value, and a target in
//! `0..=4` where any nonzero value means disease present.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub const NUM_FEATURES: usize = 13;

pub const FEATURE_NAMES: [&str; NUM_FEATURES] = [
    "age", "sex", "cp", "trestbps", "chol", "fbs", "restecg", "thalach", "exang", "oldpeak", "slope", "ca", "thal",
];

/// Features standardized per client: age, trestbps, chol, thalach, oldpeak.
/// Categorical codes pass through unscaled.
pub const CONTINUOUS_MASK: [bool; NUM_FEATURES] = [
    true, false, false, true, true, false, false, true, false, true, false, false, false,
];

const RAW_COLUMNS: usize = NUM_FEATURES + 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub age: f64,
    pub sex: f64,
    pub cp: f64,
    pub trestbps: f64,
    pub chol: f64,
    pub fbs: f64,
    pub restecg: f64,
    pub thalach: f64,
    pub exang: f64,
    pub oldpeak: f64,
    pub slope: f64,
    pub ca: f64,
    pub thal: f64,
    /// 1 when disease is present.
    pub label: u8,
}

impl PatientRecord {
    pub fn from_features(f: [f64; NUM_FEATURES], label: u8) -> Self {
        PatientRecord {
            age: f[0],
            sex: f[1],
            cp: f[2],
            trestbps: f[3],
            chol: f[4],
            fbs: f[5],
            restecg: f[6],
            thalach: f[7],
            exang: f[8],
            oldpeak: f[9],
            slope: f[10],
            ca: f[11],
            thal: f[12],
            label,
        }
    }

    pub fn features(&self) -> [f64; NUM_FEATURES] {
        [
            self.age,
            self.sex,
            self.cp,
            self.trestbps,
            self.chol,
            self.fbs,
            self.restecg,
            self.thalach,
            self.exang,
            self.oldpeak,
            self.slope,
            self.ca,
            self.thal,
        ]
    }

    /// Row in the raw file layout (label written as 0/1).
    pub fn to_csv_row(&self) -> String {
        let mut row = String::new();
        for v in self.features() {
            let _ = write!(row, "{v:?},");
        }
        let _ = write!(row, "{}", self.label);
        row
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    /// Retained records in file order.
    pub records: Vec<PatientRecord>,
    pub source_path: String,
    /// Rows dropped because at least one field was `?`.
    pub dropped_count: usize,
}

impl RawDataset {
    pub fn raw_rows(&self) -> usize {
        self.records.len() + self.dropped_count
    }

    pub fn prevalence(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        let pos = self.records.iter().filter(|r| r.label == 1).count();
        pos as f64 / self.records.len() as f64
    }

    pub fn to_samples(&self) -> Samples {
        Samples::from_records(self.records.iter())
    }
}

pub fn load_cleveland(path: impl AsRef<Path>) -> Result<RawDataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_cleveland(&text, &path.display().to_string())
}

/// Parses file contents; `source` is used in error messages and recorded on
/// the dataset.
pub fn parse_cleveland(text: &str, source: &str) -> Result<RawDataset> {
    let mut records = Vec::new();
    let mut dropped = 0;
    let mut seen = 0;

    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        seen += 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != RAW_COLUMNS {
            return Err(Error::Parse {
                path: source.to_string(),
                line: line_no,
                message: format!("expected {RAW_COLUMNS} fields, found {}", fields.len()),
            });
        }
        if fields.contains(&"?") {
            dropped += 1;
            continue;
        }
        let mut values = [0.0; RAW_COLUMNS];
        for (col, field) in fields.iter().enumerate() {
            values[col] = field.parse::<f64>().map_err(|_| Error::Parse {
                path: source.to_string(),
                line: line_no,
                message: format!("column {}: cannot parse {field:?} as a number", col + 1),
            })?;
        }
        let target = values[NUM_FEATURES];
        if !(target >= 0.0) {
            return Err(Error::Parse {
                path: source.to_string(),
                line: line_no,
                message: format!("target {target} is negative"),
            });
        }
        let mut features = [0.0; NUM_FEATURES];
        features.copy_from_slice(&values[..NUM_FEATURES]);
        records.push(PatientRecord::from_features(features, u8::from(target >= 1.0)));
    }

    if seen == 0 {
        return Err(Error::EmptyDataset(source.to_string()));
    }
    Ok(RawDataset {
        records,
        source_path: source.to_string(),
        dropped_count: dropped,
    })
}

/// Row-major feature matrix plus binary labels.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Samples {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
}

impl Samples {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<u8>) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: features.len(),
                actual: labels.len(),
            });
        }
        if let Some(d) = features.first().map(Vec::len) {
            if let Some(bad) = features.iter().find(|r| r.len() != d) {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: bad.len(),
                });
            }
        }
        Ok(Samples { features, labels })
    }

    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a PatientRecord>) -> Self {
        let mut out = Samples::default();
        for r in records {
            out.features.push(r.features().to_vec());
            out.labels.push(r.label);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Feature dimension, or 0 for an empty set.
    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn prevalence(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.labels.iter().filter(|&&y| y == 1).count() as f64 / self.len() as f64
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], u8)> + '_ {
        self.features.iter().map(Vec::as_slice).zip(self.labels.iter().copied())
    }

    /// Samples at `indices`, in that order.
    pub fn select<'a>(&'a self, indices: &'a [usize]) -> impl Iterator<Item = (&'a [f64], u8)> + 'a {
        indices
            .iter()
            .map(move |&i| (self.features[i].as_slice(), self.labels[i]))
    }

    pub fn subset(&self, indices: &[usize]) -> Samples {
        Samples {
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Concatenation in argument order.
    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a Samples>) -> Samples {
        let mut out = Samples::default();
        for p in parts {
            out.features.extend(p.features.iter().cloned());
            out.labels.extend_from_slice(&p.labels);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    pub means: Vec<f64>,
    pub std_devs: Vec<f64>,
    /// Masked features whose training variance was zero (std replaced by 1).
    pub degenerate_features: Vec<usize>,
}

impl StandardizationParams {
    pub fn identity(dim: usize) -> Self {
        StandardizationParams {
            means: vec![0.0; dim],
            std_devs: vec![1.0; dim],
            degenerate_features: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }
}

/// Fits mean/population-std for masked columns; unmasked columns get the
/// identity transform.
pub fn fit_standardizer(train_features: &[Vec<f64>], continuous_mask: &[bool]) -> Result<StandardizationParams> {
    if train_features.is_empty() {
        return Err(Error::EmptyDataset("standardizer training rows".into()));
    }
    let dim = continuous_mask.len();
    if let Some(bad) = train_features.iter().find(|r| r.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: bad.len(),
        });
    }
    let n = train_features.len() as f64;
    let mut params = StandardizationParams::identity(dim);
    for (j, _) in continuous_mask.iter().enumerate().filter(|(_, &m)| m) {
        let mean = train_features.iter().map(|r| r[j]).sum::<f64>() / n;
        let var = train_features.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        params.means[j] = mean;
        if std > 1e-12 {
            params.std_devs[j] = std;
        } else {
            log::warn!("feature {j} has zero variance in the training split; using std 1");
            params.std_devs[j] = 1.0;
            params.degenerate_features.push(j);
        }
    }
    Ok(params)
}

pub fn apply_standardizer(features: &[Vec<f64>], params: &StandardizationParams) -> Result<Vec<Vec<f64>>> {
    features
        .iter()
        .map(|row| {
            if row.len() != params.dim() {
                return Err(Error::DimensionMismatch {
                    expected: params.dim(),
                    actual: row.len(),
                });
            }
            Ok(row
                .iter()
                .zip(params.means.iter().zip(&params.std_devs))
                .map(|(x, (m, s))| (x - m) / s)
                .collect())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitDataset {
    pub train: Samples,
    pub test: Samples,
    /// Positions in the input that went to each side, ascending.
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub train_prevalence: f64,
    pub test_prevalence: f64,
}

/// Per-class seeded split. Each class sends `round_half_up(size * test_fraction)`
/// of its samples to the test side.
pub fn stratified_split(samples: &Samples, test_fraction: f64, seed: u64) -> Result<SplitDataset> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::InvalidInput(format!(
            "test fraction {test_fraction} outside [0, 1)"
        )));
    }
    let mut train_indices = Vec::new();
    let mut test_indices = Vec::new();
    for label in [0u8, 1u8] {
        let mut members: Vec<usize> = (0..samples.len()).filter(|&i| samples.labels[i] == label).collect();
        if members.len() < 2 {
            return Err(Error::CannotStratify {
                label,
                count: members.len(),
            });
        }
        let n_test = (members.len() as f64 * test_fraction + 0.5 + 1e-9).floor() as usize;
        let mut rng = rng::stream(seed, &[rng::TAG_SPLIT, u64::from(label)]);
        members.shuffle(&mut rng);
        test_indices.extend_from_slice(&members[..n_test]);
        train_indices.extend_from_slice(&members[n_test..]);
    }
    train_indices.sort_unstable();
    test_indices.sort_unstable();

    let train = samples.subset(&train_indices);
    let test = samples.subset(&test_indices);
    Ok(SplitDataset {
        train_prevalence: train.prevalence(),
        test_prevalence: test.prevalence(),
        train,
        test,
        train_indices,
        test_indices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIRST_ROW: &str = "63.0,1.0,1.0,145.0,233.0,1.0,2.0,150.0,0.0,2.3,3.0,0.0,6.0,0";

    #[test]
    fn parses_published_row() {
        let ds = parse_cleveland(FIRST_ROW, "mem").unwrap();
        assert_eq!(ds.records.len(), 1);
        let r = ds.records[0];
        assert_eq!(r.label, 0);
        assert_eq!(r.age, 63.0);
        assert_eq!(r.oldpeak, 2.3);
        assert_eq!(r.thal, 6.0);
        assert_eq!(ds.dropped_count, 0);
    }

    #[test]
    fn drops_missing_and_binarizes() {
        let text = "\
63.0,1.0,1.0,145.0,233.0,1.0,2.0,150.0,0.0,2.3,3.0,?,6.0,0
67.0,1.0,4.0,160.0,286.0,0.0,2.0,108.0,1.0,1.5,2.0,3.0,3.0,2
67.0,1.0,4.0,120.0,229.0,0.0,2.0,129.0,1.0,2.6,2.0,2.0,7.0,4
37.0,1.0,3.0,130.0,250.0,0.0,0.0,187.0,0.0,3.5,3.0,0.0,3.0,1
";
        let ds = parse_cleveland(text, "mem").unwrap();
        assert_eq!(ds.dropped_count, 1);
        assert_eq!(ds.raw_rows(), 4);
        assert!(ds.records.iter().all(|r| r.label == 1));
    }

    #[test]
    fn wrong_width_names_line() {
        let text = format!("{FIRST_ROW}\n1.0,2.0\n");
        match parse_cleveland(&text, "f.csv") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_an_error() {
        assert!(matches!(parse_cleveland("\n\n", "e"), Err(Error::EmptyDataset(_))));
    }

    #[test]
    fn cleaning_is_idempotent() {
        let text = format!("{FIRST_ROW}\n1.0,?,1,1,1,1,1,1,1,1,1,1,1,0\n");
        let once = parse_cleveland(&text, "a").unwrap();
        let rewritten: String = once.records.iter().map(|r| r.to_csv_row() + "\n").collect();
        let twice = parse_cleveland(&rewritten, "a").unwrap();
        assert_eq!(twice.dropped_count, 0);
        assert_eq!(twice.records, once.records);
    }

    #[test]
    fn standardizer_population_std() {
        let rows = vec![vec![1.0, 7.0], vec![2.0, 8.0], vec![3.0, 9.0]];
        let p = fit_standardizer(&rows, &[true, false]).unwrap();
        assert_eq!(p.means, vec![2.0, 0.0]);
        assert!((p.std_devs[0] - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(p.std_devs[1], 1.0);
        assert!(p.degenerate_features.is_empty());
    }

    #[test]
    fn constant_column_falls_back_to_unit_std() {
        let rows = vec![vec![5.0], vec![5.0], vec![5.0]];
        let p = fit_standardizer(&rows, &[true]).unwrap();
        assert_eq!(p.means, vec![5.0]);
        assert_eq!(p.std_devs, vec![1.0]);
        assert_eq!(p.degenerate_features, vec![0]);
    }

    #[test]
    fn apply_centers_and_checks_dims() {
        let p = StandardizationParams {
            means: vec![2.0],
            std_devs: vec![3.0],
            degenerate_features: vec![],
        };
        assert_eq!(apply_standardizer(&[vec![2.0]], &p).unwrap(), vec![vec![0.0]]);
        let id = StandardizationParams::identity(2);
        let x = vec![vec![1.5, -2.0]];
        assert_eq!(apply_standardizer(&x, &id).unwrap(), x);
        assert!(matches!(
            apply_standardizer(&[vec![1.0, 2.0]], &p),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn standardized_train_column_has_unit_moments() {
        let rows: Vec<Vec<f64>> = (0..37).map(|i| vec![(i as f64 * 1.7).sin() * 40.0 + 120.0]).collect();
        let p = fit_standardizer(&rows, &[true]).unwrap();
        let z = apply_standardizer(&rows, &p).unwrap();
        let n = z.len() as f64;
        let mean = z.iter().map(|r| r[0]).sum::<f64>() / n;
        let var = z.iter().map(|r| (r[0] - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 1e-9);
        assert!((var.sqrt() - 1.0).abs() < 1e-9);
    }

    fn labelled(labels: &[u8]) -> Samples {
        Samples {
            features: (0..labels.len()).map(|i| vec![i as f64]).collect(),
            labels: labels.to_vec(),
        }
    }

    #[test]
    fn ten_balanced_samples_put_one_of_each_class_in_test() {
        let s = labelled(&[0, 1, 0, 1, 0, 1, 0, 1, 0, 1]);
        let split = stratified_split(&s, 0.2, 7).unwrap();
        assert_eq!(split.test.len(), 2);
        assert_eq!(split.test.labels.iter().filter(|&&y| y == 1).count(), 1);
        assert_eq!(split.train.len(), 8);
    }

    #[test]
    fn split_is_deterministic_and_seed_sensitive() {
        let labels: Vec<u8> = (0..60).map(|i| u8::from(i % 3 == 0)).collect();
        let s = labelled(&labels);
        let a = stratified_split(&s, 0.2, 11).unwrap();
        let b = stratified_split(&s, 0.2, 11).unwrap();
        let c = stratified_split(&s, 0.2, 12).unwrap();
        assert_eq!(a.test_indices, b.test_indices);
        assert_ne!(a.test_indices, c.test_indices);
    }

    #[test]
    fn hundred_samples_keep_prevalence() {
        let labels: Vec<u8> = (0..100).map(|i| u8::from(i < 46)).collect();
        let s = labelled(&labels);
        let split = stratified_split(&s, 0.2, 3).unwrap();
        // 46 positives -> round(9.2) = 9, 54 negatives -> round(10.8) = 11
        assert_eq!(split.test.len(), 20);
        assert!((split.test_prevalence - 0.46).abs() <= 1.0 / 20.0);
        assert!((split.test_prevalence - 0.45).abs() < 1e-12);
    }

    #[test]
    fn stratify_rejects_singleton_class() {
        let s = labelled(&[0, 0, 0, 1]);
        assert!(matches!(
            stratified_split(&s, 0.2, 1),
            Err(Error::CannotStratify { label: 1, count: 1 })
        ));
    }

    #[test]
    fn standardizers_are_per_client() {
        let a = vec![vec![1.0], vec![3.0]];
        let b = vec![vec![10.0], vec![30.0]];
        let pa = fit_standardizer(&a, &[true]).unwrap();
        let pb = fit_standardizer(&b, &[true]).unwrap();
        let pa_again = fit_standardizer(&a, &[true]).unwrap();
        assert_eq!(pa, pa_again);
        assert_ne!(pa.means, pb.means);
    }
}
