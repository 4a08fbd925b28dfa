//! Non-IID severity measures across clients.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::partition::ClientDataset;

const DIST_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeterogeneityReport {
    pub client_ids: Vec<u32>,
    /// Pairwise JSD (base 2) of the clients' label distributions.
    pub jsd_matrix: Vec<Vec<f64>>,
    /// Pairwise Gaussian-kernel MMD of standardized features.
    pub mmd_matrix: Vec<Vec<f64>>,
    pub gini: f64,
    pub avg_jsd: f64,
    pub avg_mmd: f64,
    pub max_mmd: f64,
}

fn check_distribution(p: &[f64]) -> Result<()> {
    if p.iter().any(|&v| !(0.0..=1.0 + DIST_TOL).contains(&v)) {
        return Err(Error::InvalidDistribution(format!("{p:?} has entries outside [0, 1]")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > DIST_TOL {
        return Err(Error::InvalidDistribution(format!("{p:?} sums to {s}")));
    }
    Ok(())
}

fn kl_to_mixture(p: &[f64], m: &[f64]) -> f64 {
    p.iter()
        .zip(m)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &mi)| pi * (pi / mi).log2())
        .sum()
}

/// Jensen-Shannon divergence with base-2 logarithms, so the result lies in
/// [0, 1].
pub fn jensen_shannon(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            actual: q.len(),
        });
    }
    check_distribution(p)?;
    check_distribution(q)?;
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    let jsd = 0.5 * kl_to_mixture(p, &m) + 0.5 * kl_to_mixture(q, &m);
    Ok(jsd.clamp(0.0, 1.0))
}

/// Label distribution `(P(y=0), P(y=1))` for a prevalence.
pub fn binary_distribution(prevalence: f64) -> [f64; 2] {
    [1.0 - prevalence, prevalence]
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn check_dims(x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<usize> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::InvalidInput("MMD needs non-empty samples".into()));
    }
    let d = x[0].len();
    if let Some(bad) = x.iter().chain(y).find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: bad.len(),
        });
    }
    Ok(d)
}

/// Median of pairwise Euclidean distances over the pooled rows, or 1 when
/// that median is zero.
pub fn median_bandwidth(x: &[Vec<f64>], y: &[Vec<f64>]) -> f64 {
    let pooled: Vec<&Vec<f64>> = x.iter().chain(y).collect();
    let mut d: Vec<f64> = Vec::with_capacity(pooled.len() * pooled.len().saturating_sub(1) / 2);
    for i in 0..pooled.len() {
        for j in i + 1..pooled.len() {
            d.push(sq_dist(pooled[i], pooled[j]).sqrt());
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let mid = d.len() / 2;
    let median = if d.len() % 2 == 1 {
        d[mid]
    } else {
        0.5 * (d[mid - 1] + d[mid])
    };
    if median > 0.0 {
        median
    } else {
        1.0
    }
}

fn mean_kernel(a: &[Vec<f64>], b: &[Vec<f64>], inv_two_gamma_sq: f64) -> f64 {
    let mut s = 0.0;
    for u in a {
        for v in b {
            s += (-sq_dist(u, v) * inv_two_gamma_sq).exp();
        }
    }
    s / (a.len() * b.len()) as f64
}

/// Biased (V-statistic) MMD with kernel `exp(-|a-b|^2 / (2 gamma^2))`.
pub fn gaussian_mmd_with_bandwidth(x: &[Vec<f64>], y: &[Vec<f64>], gamma: f64) -> Result<f64> {
    check_dims(x, y)?;
    if !(gamma > 0.0) {
        return Err(Error::InvalidInput(format!("bandwidth {gamma} must be positive")));
    }
    let c = 1.0 / (2.0 * gamma * gamma);
    let mmd2 = mean_kernel(x, x, c) + mean_kernel(y, y, c) - 2.0 * mean_kernel(x, y, c);
    Ok(mmd2.max(0.0).sqrt())
}

/// MMD with the median-heuristic bandwidth.
pub fn gaussian_mmd(x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<f64> {
    check_dims(x, y)?;
    gaussian_mmd_with_bandwidth(x, y, median_bandwidth(x, y))
}

/// Mean absolute difference over all ordered pairs, normalized by twice the
/// mean.
pub fn gini_coefficient(sizes: &[f64]) -> Result<f64> {
    if sizes.is_empty() {
        return Err(Error::InvalidInput("Gini needs at least one size".into()));
    }
    if let Some(bad) = sizes.iter().find(|&&s| !(s > 0.0)) {
        return Err(Error::InvalidInput(format!("size {bad} must be positive")));
    }
    let k = sizes.len() as f64;
    let mean = sizes.iter().sum::<f64>() / k;
    let mut abs_diff = 0.0;
    for a in sizes {
        for b in sizes {
            abs_diff += (a - b).abs();
        }
    }
    Ok(abs_diff / (2.0 * k * k * mean))
}

fn upper_mean_max(m: &[Vec<f64>]) -> (f64, f64) {
    let mut sum = 0.0;
    let mut max: f64 = 0.0;
    let mut n = 0usize;
    for (i, row) in m.iter().enumerate() {
        for &v in &row[i + 1..] {
            sum += v;
            max = max.max(v);
            n += 1;
        }
    }
    (if n == 0 { 0.0 } else { sum / n as f64 }, max)
}

/// Pairwise matrices filled from the upper triangle, so symmetry and a zero
/// diagonal hold exactly.
pub fn heterogeneity_report(clients: &[ClientDataset]) -> Result<HeterogeneityReport> {
    let k = clients.len();
    let features: Vec<Vec<Vec<f64>>> = clients.iter().map(|c| c.all_standardized().features).collect();
    let mut jsd = vec![vec![0.0; k]; k];
    let mut mmd = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let v = jensen_shannon(
                &binary_distribution(clients[i].disease_rate),
                &binary_distribution(clients[j].disease_rate),
            )?;
            jsd[i][j] = v;
            jsd[j][i] = v;
            let v = gaussian_mmd(&features[i], &features[j])?;
            mmd[i][j] = v;
            mmd[j][i] = v;
        }
    }
    let sizes: Vec<f64> = clients.iter().map(|c| c.sample_count as f64).collect();
    let gini = if sizes.is_empty() {
        0.0
    } else {
        gini_coefficient(&sizes)?
    };
    let (avg_jsd, _) = upper_mean_max(&jsd);
    let (avg_mmd, max_mmd) = upper_mean_max(&mmd);
    Ok(HeterogeneityReport {
        client_ids: clients.iter().map(|c| c.client_id).collect(),
        jsd_matrix: jsd,
        mmd_matrix: mmd,
        gini,
        avg_jsd,
        avg_mmd,
        max_mmd,
    })
}
