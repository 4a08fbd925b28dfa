#![allow(dead_code)]

use fedsim_core::experiment::{prepare_from_raw, PreparedData};
use fedsim_core::{load_cleveland, ExperimentConfig};

pub const DATA_PATH: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/processed.cleveland.data");

pub fn real_config() -> ExperimentConfig {
    ExperimentConfig {
        data_path: DATA_PATH.into(),
        ..ExperimentConfig::default()
    }
}

pub fn real_data(cfg: &ExperimentConfig) -> PreparedData {
    let raw = load_cleveland(&cfg.data_path).expect("data file present");
    prepare_from_raw(cfg, raw).expect("default partition is valid")
}
