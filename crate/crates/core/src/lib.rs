//! Analysis toolkit for daily subjective well-being (SWB) indices.
//!
//! The crate covers the whole pipeline: loading and aligning daily covariate
//! panels, aggregating sentiment distributions into the composite SWB index,
//! calibrating mean-reverting diffusions, the rolling-window elastic net with
//! its ARIMA and random-forest companions, and a maximum-likelihood
//! structural equation estimator.

pub mod dynamics;
pub mod enet;
pub mod error;
pub mod ingest;
pub mod optim;
pub mod rng;
pub mod sde;
pub mod sem;
pub mod series;
pub mod stats;
pub mod swb;
pub mod synthetic;

pub use error::{Error, Result};
pub use series::{align_panel, AlignPolicy, DailySeries, Panel};
pub use stats::{spearman, CorrelationResult};
