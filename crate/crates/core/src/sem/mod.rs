//! Structural equation models in RAM form, fitted by maximum likelihood.

pub mod fit;
pub mod model;

pub use fit::{fit_sem, fit_sem_cov, fml, sample_covariance, Estimate, SemConfig, SemFit};
pub use model::{compile_model, Op, RamModel, SemModel, Statement};
