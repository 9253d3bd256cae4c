//! Shared fixtures for the benchmarks, all built from the seeded generators.

use swb_core::enet::DesignMatrix;
use swb_core::sde::{simulate, SdeConfig, SdeModelKind, SdeParams};
use swb_core::synthetic::{drifting_panel, sample_data, DriftPanel, DriftSpec};
use swb_core::{DailySeries, Panel};

pub const SEED: u64 = 20_201_015;

pub fn drift() -> DriftPanel {
    drifting_panel(&DriftSpec::default(), SEED).expect("default spec is valid")
}

/// Standardized covariates and target of the first `rows` drift-panel days.
pub fn enet_problem(rows: usize) -> (DesignMatrix, Vec<f64>) {
    let d = drift();
    let col = |name: &str| -> Vec<f64> {
        d.panel.values(name).expect("column")[..rows].iter().map(|v| v.expect("complete")).collect()
    };
    let columns: Vec<Vec<f64>> = d.covariates.iter().map(|c| col(c)).collect();
    let x = DesignMatrix::from_columns(d.covariates.clone(), &columns).expect("design");
    let (x, _, _) = x.standardize().expect("non-constant");
    (x, col(&d.target))
}

pub fn vasicek_path(steps: usize) -> DailySeries {
    let truth = SdeParams::new(3.16, 38.99, 14.7).expect("valid");
    simulate(SdeModelKind::Vas, &truth, truth.beta, steps, &SdeConfig::default(), SEED).expect("simulates")
}

pub fn sample_panel() -> Panel {
    sample_data(320, SEED).expect("sample data").0
}
