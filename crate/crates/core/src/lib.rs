//! Monte-Carlo link-level simulation of space-time, space-frequency and
//! space-time-frequency spreading for dense IoT uplinks.
//!
//! Devices spread their symbols with dispersion vectors onto exclusively
//! owned blocks of a time-frequency frame; a multi-antenna gateway estimates
//! each link from orthogonal pilots, equalizes, decodes, and the metrics
//! engine reports outage probability, interference power and output SINR.

pub mod channel;
pub mod codebook;
pub mod config;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod modem;
pub mod receiver;
pub mod results;
pub mod rng;
pub mod scenario;
pub mod spreading;

pub use config::{preset, sweep_presets, SweepKind, SystemConfig};
pub use engine::{run_experiment, run_experiment_with_workers, Simulator};
pub use error::{Error, Result};
pub use results::{emit_results, OutputFormat, ResultRow, ResultTable};
pub use spreading::Mode;
