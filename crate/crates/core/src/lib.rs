//! Workbench for building-thermal time-series work: a lumped-parameter test-cell
//! simulator, trend labeling, a vector-quantized series synthesizer with classical
//! baselines, a recurrent forecaster, forecast-error metrics with distribution
//! diagnostics, and a seeded experiment harness that measures the downstream
//! forecasting utility of synthetic augmentation.
//!
//! All randomness flows from explicit 64-bit seeds; every pipeline stage is a
//! deterministic function of its inputs and seed.

pub mod config;
pub mod dataio;
pub mod error;
pub mod forecaster;
pub mod harness;
pub mod labeling;
pub mod metrics;
pub mod nn;
pub mod seeds;
pub mod sim;
pub mod synth;

pub use error::{Error, Result};
