//! Series files, run configuration and manifests.

pub mod config;
pub mod manifest;
pub mod series;

pub use config::RunConfig;
pub use manifest::{config_digest, RunManifest};
pub use series::{read_series, write_series, CircularSeries};
