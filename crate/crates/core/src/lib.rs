pub mod baselines;
pub mod config;
pub mod dataio;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod graph;
pub mod model;
pub mod numcore;
pub mod plot;
pub mod scoring;
pub mod stats;
pub mod synthetic;
pub mod training;

pub use error::{Error, Result};
