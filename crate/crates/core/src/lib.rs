//! Massive MU-MIMO uplink simulator with constant-envelope pilot CFO
//! estimation (spatially averaged periodogram) and TR-MRC detection.
//!
//! Module map:
//! - [`config`]: scenario parameters, validation, the CFO search grid.
//! - [`channel`]: Rayleigh taps, CFOs, received-signal synthesis.
//! - [`periodogram`]: the CFO estimator, its operation count, grid-exponent selection.
//! - [`receiver`]: channel estimation and TR-MRC.
//! - [`trial`]: one end-to-end seeded trial.
//! - [`metrics`]: MSE, SINR and achievable-rate Monte Carlo.
//! - [`experiments`]: sweeps, minimum-SNR search, array-gain study.
//! - [`cli`]: the `mimo-cfo` command line and CSV output.

pub mod channel;
pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod metrics;
pub mod periodogram;
pub mod receiver;
pub mod selftest;
pub mod stream;
pub mod trial;

pub use config::{build_grid, FrequencyGrid, RawConfig, SystemConfig};
pub use error::{Error, Result};
pub use trial::RxMode;
