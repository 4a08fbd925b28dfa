//! Fixtures shared by the training benchmarks.

use fedsim_core::synthetic::synthetic_clients;
use fedsim_core::{ClientDataset, FedConfig};

pub struct Fixture {
    pub clients: Vec<ClientDataset>,
    pub cfg: FedConfig,
}

/// Synthetic four-client federation of `n` patients with a short schedule.
pub fn fixture(n: usize, rounds: usize) -> Fixture {
    Fixture {
        clients: synthetic_clients(n, 7),
        cfg: FedConfig {
            rounds,
            ..FedConfig::default()
        },
    }
}
