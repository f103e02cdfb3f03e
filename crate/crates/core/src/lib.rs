//! Gridded climate physical-risk engine: emissions scenarios to per-cell
//! warming, damages under a family of damage functions, present-value loss
//! metrics and threshold-based risk indices over Monte Carlo ensembles.

pub mod axis;
pub mod climate;
pub mod damage;
pub mod engine;
pub mod error;
pub mod grid;
pub mod metrics;
pub mod risk;
pub mod rng;
pub mod scenario;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
