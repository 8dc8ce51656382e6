//! Experiment runner for adaptive surrogate inference: configuration,
//! file formats, stage pipeline and run manifests.

pub mod cache;
pub mod config;
pub mod error;
pub mod formats;
pub mod manifest;
pub mod pipeline;

pub use config::{ChainSpec, ExperimentConfig};
pub use error::{Error, Result};
pub use pipeline::{AnalysisReport, Experiment};
