//! Reproducible runs of the `swb_core` analyses from a TOML config.

pub mod config;
pub mod output;
pub mod pipeline;
pub mod plot;

pub use config::{RunConfig, Stage};
pub use output::Manifest;
pub use pipeline::{run, RunSummary, StageError};
