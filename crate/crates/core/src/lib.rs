//! Max-min end-to-end rate allocation for multi-pair decode-and-forward
//! relaying where the relay is powered by simultaneous wireless information
//! and power transfer.

pub mod baselines;
pub mod channel;
pub mod conic;
pub mod error;
pub mod harness;
pub mod ia;
pub mod model;

pub use error::{Error, Result};
pub use ia::{IaConfig, IaOptions, IaOutcome};
pub use model::{Allocation, ChannelSet, Mode, NonlinearEhParams, PowerReport, RateReport, SystemParams};
