//! Multi-seed aggregation and significance testing.
//!
//! The Student t distribution is evaluated through the regularized
//! incomplete beta function (Lentz continued fraction, tolerance 1e-15 per
//! term) with a Lanczos log-gamma.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSeries {
    pub label: String,
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl RunSeries {
    pub fn new(label: impl Into<String>, values: Vec<f64>, seeds: Vec<u64>) -> Result<Self> {
        if values.len() != seeds.len() {
            return Err(Error::DimensionMismatch {
                expected: seeds.len(),
                actual: values.len(),
            });
        }
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput("run series seeds must be distinct".into()));
        }
        Ok(RunSeries {
            label: label.into(),
            values,
            seeds,
        })
    }

    /// Series keyed by consecutive placeholder seeds `0..n`.
    pub fn unseeded(label: impl Into<String>, values: Vec<f64>) -> Self {
        let seeds = (0..values.len() as u64).collect();
        RunSeries {
            label: label.into(),
            values,
            seeds,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    /// Alternative: mean(a) > mean(b).
    OneSided,
    TwoSided,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    pub tail: Tail,
    pub mean_diff: f64,
    pub t_stat: f64,
    pub df: f64,
    pub p_value: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
    pub cohens_d: f64,
    pub corrected_alpha: f64,
}

/// Mean and sample (n - 1) standard deviation of raw values.
pub fn mean_std(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 values, got {}",
            values.len()
        )));
    }
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((m, var.sqrt()))
}

/// Mean and sample std, accepting a single value (std 0). Used for report
/// aggregation where a one-seed sweep is legitimate.
pub(crate) fn mean_std_lenient(values: &[f64]) -> (f64, f64) {
    match values {
        [] => (0.0, 0.0),
        [v] => (*v, 0.0),
        _ => mean_std(values).expect("len >= 2"),
    }
}

pub fn summarize(series: &RunSeries) -> Result<(f64, f64)> {
    mean_std(&series.values)
}

fn moments(values: &[f64]) -> Result<(f64, f64, f64)> {
    let (m, s) = mean_std(values)?;
    Ok((m, s * s, values.len() as f64))
}

pub fn cohens_d(a: &RunSeries, b: &RunSeries) -> Result<f64> {
    let (ma, va, na) = moments(&a.values)?;
    let (mb, vb, nb) = moments(&b.values)?;
    let pooled = (((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0)).sqrt();
    if pooled == 0.0 {
        return if ma == mb { Ok(0.0) } else { Err(Error::ZeroVariance) };
    }
    Ok((ma - mb) / pooled)
}

/// Welch's unequal-variance t-test of `a` against `b`.
pub fn t_test(a: &RunSeries, b: &RunSeries, tail: Tail) -> Result<TestResult> {
    let (ma, va, na) = moments(&a.values)?;
    let (mb, vb, nb) = moments(&b.values)?;
    let diff = ma - mb;
    let se_a = va / na;
    let se_b = vb / nb;
    let se = (se_a + se_b).sqrt();
    if se == 0.0 {
        if diff != 0.0 {
            return Err(Error::ZeroVariance);
        }
        return Ok(TestResult {
            tail,
            mean_diff: 0.0,
            t_stat: 0.0,
            df: na + nb - 2.0,
            p_value: match tail {
                Tail::OneSided => 0.5,
                Tail::TwoSided => 1.0,
            },
            ci95_low: 0.0,
            ci95_high: 0.0,
            cohens_d: 0.0,
            corrected_alpha: 0.05,
        });
    }
    let t = diff / se;
    let df = (se_a + se_b).powi(2) / (se_a * se_a / (na - 1.0) + se_b * se_b / (nb - 1.0));
    let p = match tail {
        Tail::OneSided => student_t_sf(t, df),
        Tail::TwoSided => 2.0 * student_t_sf(t.abs(), df),
    }
    .clamp(0.0, 1.0);
    let half = student_t_quantile(0.975, df) * se;
    Ok(TestResult {
        tail,
        mean_diff: diff,
        t_stat: t,
        df,
        p_value: p,
        ci95_low: diff - half,
        ci95_high: diff + half,
        cohens_d: cohens_d(a, b)?,
        corrected_alpha: 0.05,
    })
}

pub fn bonferroni(alpha: f64, comparisons: usize) -> Result<f64> {
    if comparisons == 0 {
        return Err(Error::InvalidInput("Bonferroni needs at least one comparison".into()));
    }
    Ok(alpha / comparisons as f64)
}

const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + 7.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

/// Student t CDF with `df` degrees of freedom.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return if t > 0.0 { 1.0 } else { 0.0 };
    }
    let x = df / (df + t * t);
    let tail = 0.5 * regularized_incomplete_beta(df / 2.0, 0.5, x);
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Upper tail `P(T > t)`, computed without cancellation for large t.
pub fn student_t_sf(t: f64, df: f64) -> f64 {
    student_t_cdf(-t, df)
}

/// Inverse CDF by bracketing and bisection.
pub fn student_t_quantile(p: f64, df: f64) -> f64 {
    if p == 0.5 {
        return 0.0;
    }
    if p < 0.5 {
        return -student_t_quantile(1.0 - p, df);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while student_t_cdf(hi, df) < p {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return hi;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if student_t_cdf(mid, df) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi.max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn series(v: &[f64]) -> RunSeries {
        RunSeries::unseeded("s", v.to_vec())
    }

    #[test]
    fn summarize_examples() {
        assert_eq!(summarize(&series(&[1.0, 1.0, 1.0])).unwrap(), (1.0, 0.0));
        let (m, s) = summarize(&series(&[0.0, 2.0])).unwrap();
        assert_eq!(m, 1.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
        assert!(summarize(&series(&[1.0])).is_err());
    }

    #[test]
    fn run_series_validation() {
        assert!(RunSeries::new("x", vec![1.0, 2.0], vec![1, 1]).is_err());
        assert!(RunSeries::new("x", vec![1.0], vec![1, 2]).is_err());
        assert!(RunSeries::new("x", vec![1.0, 2.0], vec![1, 2]).is_ok());
    }

    #[test]
    fn identical_series() {
        let a = series(&[0.81, 0.83, 0.85]);
        let r = t_test(&a, &a, Tail::TwoSided).unwrap();
        assert_eq!(r.t_stat, 0.0);
        assert_eq!(r.cohens_d, 0.0);
        assert!((r.p_value - 1.0).abs() < 1e-12);
        let one = t_test(&a, &a, Tail::OneSided).unwrap();
        assert!((one.p_value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_variance_equal_means() {
        let a = series(&[2.0, 2.0]);
        let r = t_test(&a, &a, Tail::TwoSided).unwrap();
        assert_eq!((r.t_stat, r.p_value), (0.0, 1.0));
        assert_eq!(t_test(&a, &a, Tail::OneSided).unwrap().p_value, 0.5);
        let b = series(&[3.0, 3.0]);
        assert!(matches!(t_test(&a, &b, Tail::TwoSided), Err(Error::ZeroVariance)));
        assert!(matches!(cohens_d(&a, &b), Err(Error::ZeroVariance)));
    }

    #[test]
    fn welch_textbook_case() {
        // means 2 and 5, unit variances, n = 3: t = -3/sqrt(2/3), df = 4
        let a = series(&[1.0, 2.0, 3.0]);
        let b = series(&[4.0, 5.0, 6.0]);
        let r = t_test(&a, &b, Tail::TwoSided).unwrap();
        assert!((r.t_stat + 3.674_234_614_174_767).abs() < 1e-12);
        assert!((r.df - 4.0).abs() < 1e-12);
        // scipy.stats.ttest_ind(a, b, equal_var=False).pvalue
        assert!((r.p_value - 0.021_311_641_128_756_727).abs() < 1e-10);
        assert!((r.cohens_d + 3.0).abs() < 1e-12);
        assert!(r.ci95_low <= r.mean_diff && r.mean_diff <= r.ci95_high);
    }

    #[test]
    fn shift_by_one_sigma_gives_unit_d() {
        let a = series(&[1.0, 2.0, 3.0, 4.0]);
        let sd = mean_std(&a.values).unwrap().1;
        let b = series(&a.values.iter().map(|v| v - sd).collect::<Vec<_>>());
        assert!((cohens_d(&a, &b).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bonferroni_examples() {
        assert_eq!(bonferroni(0.05, 1).unwrap(), 0.05);
        assert!((bonferroni(0.05, 5).unwrap() - 0.01).abs() < 1e-18);
        assert_eq!(bonferroni(0.05, 4).unwrap(), 0.0125);
        assert!(bonferroni(0.05, 0).is_err());
    }

    #[test]
    fn t_quantile_round_trips() {
        for &df in &[1.0, 2.5, 4.0, 10.0, 97.3] {
            for &p in &[0.6, 0.9, 0.975, 0.999] {
                let q = student_t_quantile(p, df);
                assert!((student_t_cdf(q, df) - p).abs() < 1e-12, "df={df} p={p}");
            }
        }
        // df = 1 is Cauchy: quantile = tan(pi (p - 1/2))
        let q = student_t_quantile(0.975, 1.0);
        assert!((q - (std::f64::consts::PI * 0.475).tan()).abs() < 1e-9);
    }

    #[test]
    fn ln_gamma_reference() {
        assert!(ln_gamma(1.0).abs() < 1e-14);
        assert!(ln_gamma(2.0).abs() < 1e-14);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
        assert!((ln_gamma(10.0) - 362_880f64.ln()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn swapping_negates_t_and_d(
            a in proptest::collection::vec(0.0f64..1.0, 2..12),
            b in proptest::collection::vec(0.0f64..1.0, 2..12),
        ) {
            let (sa, sb) = (series(&a), series(&b));
            let ab = t_test(&sa, &sb, Tail::TwoSided);
            let ba = t_test(&sb, &sa, Tail::TwoSided);
            if let (Ok(ab), Ok(ba)) = (ab, ba) {
                prop_assert!((ab.t_stat + ba.t_stat).abs() < 1e-9);
                prop_assert!((ab.cohens_d + ba.cohens_d).abs() < 1e-9);
                prop_assert!((ab.p_value - ba.p_value).abs() < 1e-9);
                prop_assert!((0.0..=1.0).contains(&ab.p_value));
                prop_assert!(ab.ci95_low <= ab.mean_diff && ab.mean_diff <= ab.ci95_high);
            }
        }

        #[test]
        fn cohens_d_is_scale_invariant(
            a in proptest::collection::vec(0.0f64..1.0, 2..10),
            b in proptest::collection::vec(0.0f64..1.0, 2..10),
            c in 0.01f64..100.0,
        ) {
            let d = cohens_d(&series(&a), &series(&b));
            let sa: Vec<f64> = a.iter().map(|v| v * c).collect();
            let sb: Vec<f64> = b.iter().map(|v| v * c).collect();
            if let Ok(d) = d {
                let ds = cohens_d(&series(&sa), &series(&sb)).unwrap();
                prop_assert!((d - ds).abs() < 1e-9 * d.abs().max(1.0));
            }
        }
    }
}
