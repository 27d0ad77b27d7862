//! Shared fixtures for the benchmarks.

use relayfair::channel::{self, Geometry};
use relayfair::{ChannelSet, NonlinearEhParams, SystemParams};

/// A reference instance: K pairs, N relay antennas, 18 dBm source budget.
pub struct Instance {
    pub chan: ChannelSet,
    pub params: SystemParams,
    pub eh: NonlinearEhParams,
}

impl Instance {
    pub fn reference(k: usize, n: usize, trial: u64) -> Self {
        let geo = Geometry::uniform(k, 10.0, 15.0, 3.5, 30.0);
        Self {
            chan: channel::generate(1, trial, &geo, n).expect("reference geometry is valid"),
            params: SystemParams::reference(k, n, 1e-3 * 10f64.powf(1.8)),
            eh: NonlinearEhParams::reference(),
        }
    }
}
