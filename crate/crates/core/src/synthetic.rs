//! Seeded synthetic cohorts with the Cleveland column layout, for tests and
//! benchmarks that should not depend on the data file.

use crate::data::{PatientRecord, RawDataset};
use crate::partition::{partition_by_age, prepare_clients, ClientDataset, WindowSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A Cleveland-shaped dataset of `n` random patients, with disease risk
/// rising in age and oldpeak.
pub fn synthetic_cohort(n: usize, seed: u64) -> RawDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records = (0..n)
        .map(|_| {
            let age = rng.gen_range(29.0..78.0_f64).round();
            let oldpeak = (rng.gen_range(0.0..4.0_f64) * 10.0).round() / 10.0;
            let risk = (age - 54.0) / 10.0 + oldpeak - 1.0 + rng.gen_range(-1.0..1.0);
            let features = [
                age,
                f64::from(rng.gen_range(0..2u8)),
                f64::from(rng.gen_range(1..5u8)),
                rng.gen_range(94.0..200.0_f64).round(),
                rng.gen_range(126.0..564.0_f64).round(),
                f64::from(rng.gen_range(0..2u8)),
                f64::from(rng.gen_range(0..3u8)),
                rng.gen_range(71.0..202.0_f64).round(),
                f64::from(rng.gen_range(0..2u8)),
                oldpeak,
                f64::from(rng.gen_range(1..4u8)),
                f64::from(rng.gen_range(0..4u8)),
                [3.0, 6.0, 7.0][rng.gen_range(0..3)],
            ];
            PatientRecord::from_features(features, u8::from(risk > 0.0))
        })
        .collect();
    RawDataset {
        records,
        source_path: "synthetic".into(),
        dropped_count: 0,
    }
}

/// Four overlapping age-window clients built from [`synthetic_cohort`].
pub fn synthetic_clients(n: usize, seed: u64) -> Vec<ClientDataset> {
    let raw = synthetic_cohort(n, seed);
    let target = |f: f64| (n as f64 * f) as usize;
    let specs = vec![
        WindowSpec::new("older", 0.4, 1.0, target(0.32)),
        WindowSpec::new("middle", 0.3, 0.7, target(0.28)),
        WindowSpec::new("small", 0.2, 0.5, target(0.15)),
        WindowSpec::new("younger", 0.0, 0.4, target(0.24)),
    ];
    let parts = partition_by_age(&raw, &specs, seed).expect("valid synthetic windows");
    prepare_clients(&parts, 0.2, seed).expect("stratifiable synthetic clients")
}
