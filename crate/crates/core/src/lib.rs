//! Knowledge-guided recurrent VAE for estimating time-varying effects of
//! sea-surface height on sea-ice thickness.

pub mod autodiff;
pub mod baselines;
pub mod checkpoint;
pub mod config;
pub mod error;
pub mod experiment;
pub mod ingest;
pub mod model;
pub mod nn;
pub mod objectives;
pub mod plot;
pub mod synthetic;
pub mod train;
pub mod treatment;
pub mod windowing;

pub use error::{KgcmError, Result};
