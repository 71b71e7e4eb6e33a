//! Particle swarm search for the layer count, layer width and local epoch
//! count of LSTM models trained by federated averaging, benchmarked against
//! exhaustive grid search.

pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod federated;
pub mod harness;
pub mod learner;
pub mod pso;
pub mod report;

pub use error::{Error, Result};
