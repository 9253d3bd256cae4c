//! Seeded synthetic panels with a known generating model.
//!
//! The target follows `y_d = ρ·y_{d−1} + b·x_{a(d)}[d−1] + ε_d`, where the
//! active covariate `a(d)` switches between regimes. All other covariates are
//! pure noise, so a window fit can be scored against the truth.

use chrono::NaiveDate;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dynamics::DynResult;
use crate::error::Result;
use crate::rng;
use crate::series::{consecutive_days, DailySeries, Panel};
use crate::swb::{swb_series, ComponentDistribution, DailyComponents};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    /// First panel row (inclusive) at which `variable` drives the target.
    pub from_row: usize,
    pub variable: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DriftSpec {
    pub days: usize,
    pub n_covariates: usize,
    pub rho: f64,
    pub effect: f64,
    pub noise_sd: f64,
    /// `(first row, covariate index)` in increasing row order; the first entry must start at 0.
    pub switches: Vec<(usize, usize)>,
    pub start: NaiveDate,
}

impl Default for DriftSpec {
    fn default() -> Self {
        Self {
            days: 320,
            n_covariates: 6,
            rho: 0.3,
            effect: 1.0,
            noise_sd: 0.5,
            switches: vec![(0, 0), (110, 1), (215, 2)],
            start: NaiveDate::from_ymd_opt(2020, 2, 1).expect("valid date"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DriftPanel {
    pub panel: Panel,
    pub target: String,
    pub covariates: Vec<String>,
    pub regimes: Vec<Regime>,
}

impl DriftPanel {
    /// The covariate driving the target at panel row `row`.
    pub fn active_at(&self, row: usize) -> &str {
        &self
            .regimes
            .iter()
            .rev()
            .find(|r| r.from_row <= row)
            .expect("first regime starts at row 0")
            .variable
    }
}

/// Selection rates of the true driver, pooled over covariates. Windows whose
/// target rows span a switch count for neither side. "Top" means a relative
/// rank of exactly 1.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Recovery {
    pub active_windows: usize,
    pub selected_when_active: usize,
    pub top_when_active: usize,
    pub inactive_windows: usize,
    pub selected_when_inactive: usize,
    pub top_when_inactive: usize,
}

impl Recovery {
    pub fn active_rate(&self) -> f64 {
        self.selected_when_active as f64 / self.active_windows.max(1) as f64
    }

    pub fn inactive_rate(&self) -> f64 {
        self.selected_when_inactive as f64 / self.inactive_windows.max(1) as f64
    }

    pub fn top_active_rate(&self) -> f64 {
        self.top_when_active as f64 / self.active_windows.max(1) as f64
    }

    pub fn top_inactive_rate(&self) -> f64 {
        self.top_when_inactive as f64 / self.inactive_windows.max(1) as f64
    }
}

pub fn score_recovery(truth: &DriftPanel, result: &DynResult, window_len: usize) -> Recovery {
    let mut r = Recovery::default();
    for w in &result.windows {
        let t = truth.panel.position(w.date_t).expect("window date in panel");
        let drivers: Vec<&str> = (t + 1 - window_len..=t).map(|d| truth.active_at(d)).collect();
        for v in &truth.covariates {
            let selected = w.coefficients.get(v).is_some_and(|c| *c != 0.0);
            let top = w.rf_relative_rank.get(v).is_some_and(|q| *q == 1.0);
            let hits = drivers.iter().filter(|d| **d == v.as_str()).count();
            if hits == drivers.len() {
                r.active_windows += 1;
                r.selected_when_active += selected as usize;
                r.top_when_active += top as usize;
            } else if hits == 0 {
                r.inactive_windows += 1;
                r.selected_when_inactive += selected as usize;
                r.top_when_inactive += top as usize;
            }
        }
    }
    r
}

pub fn covariate_name(j: usize) -> String {
    format!("x{}", j + 1)
}

pub fn drifting_panel(spec: &DriftSpec, seed: u64) -> Result<DriftPanel> {
    let mut rng = rng::rng_for(seed, 0x5E7);
    let n = spec.days;
    let k = spec.n_covariates;
    let x: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    let regimes: Vec<Regime> = spec
        .switches
        .iter()
        .map(|&(row, j)| Regime {
            from_row: row,
            variable: covariate_name(j),
        })
        .collect();
    let active = |row: usize| spec.switches.iter().rev().find(|s| s.0 <= row).map_or(0, |s| s.1);

    let mut y = vec![0.0; n];
    for d in 1..n {
        let e: f64 = rng.sample(StandardNormal);
        y[d] = spec.rho * y[d - 1] + spec.effect * x[active(d)][d - 1] + spec.noise_sd * e;
    }

    let mut panel = Panel::new(consecutive_days(spec.start, n))?;
    panel.insert(&DailySeries::from_values("y", spec.start, &y)?)?;
    let covariates: Vec<String> = (0..k).map(covariate_name).collect();
    for (name, col) in covariates.iter().zip(&x) {
        panel.insert(&DailySeries::from_values(name.as_str(), spec.start, col)?)?;
    }
    Ok(DriftPanel {
        panel,
        target: "y".into(),
        covariates,
        regimes,
    })
}

/// A small panel exercising every stage: an `SWB` index built from sentiment
/// components, and covariates `x1..x6` loading on two AR(1) factors
/// (`x1..x3` and `x4..x6`). The index is driven by lagged `x1` for the first
/// half and lagged `x4` for the second.
pub fn sample_data(days: usize, seed: u64) -> Result<(Panel, Vec<DailyComponents>)> {
    let start = NaiveDate::from_ymd_opt(2020, 2, 1).expect("valid date");
    let mut rng = rng::rng_for(seed, 0x5A3);
    let mut normal = move || -> f64 { rng.sample(StandardNormal) };
    let mut factors = [vec![0.0; days], vec![0.0; days]];
    for f in factors.iter_mut() {
        f[0] = normal();
        for d in 1..days {
            f[d] = 0.8 * f[d - 1] + 0.6 * normal();
        }
    }
    let loadings = [0.9, 0.8, 0.7];
    let x: Vec<Vec<f64>> = (0..6)
        .map(|j| {
            let l = loadings[j % 3];
            let f = &factors[j / 3];
            (0..days).map(|d| l * f[d] + (1.0 - l * l).sqrt() * normal()).collect()
        })
        .collect();

    let mut level = vec![40.0; days];
    for d in 1..days {
        let driver = if d < days / 2 { &x[0] } else { &x[3] };
        level[d] = 40.0 + 0.6 * (level[d - 1] - 40.0) + 1.5 * driver[d - 1] + 0.8 * normal();
    }

    let dates = consecutive_days(start, days);
    let mut components = Vec::with_capacity(days);
    for (d, date) in dates.iter().enumerate() {
        let mut offsets: [f64; 8] = std::array::from_fn(|_| 0.03 * normal());
        let mean = offsets.iter().sum::<f64>() / 8.0;
        offsets.iter_mut().for_each(|o| *o -= mean);
        let dists: Vec<ComponentDistribution> = offsets
            .iter()
            .map(|o| {
                let q = (level[d] / 100.0 + o).clamp(0.01, 0.99);
                let polar = 0.5 + 0.2 * normal().tanh();
                let neutral = (1.0 - polar) * 0.7;
                ComponentDistribution::new(q * polar, neutral, (1.0 - q) * polar, 1.0 - polar - neutral)
            })
            .collect::<Result<_>>()?;
        components.push(DailyComponents::new(*date, dists.try_into().expect("eight components")));
    }

    let mut panel = Panel::new(dates)?;
    panel.insert(&swb_series("SWB", &components)?)?;
    for (j, col) in x.iter().enumerate() {
        panel.insert(&DailySeries::from_values(covariate_name(j), start, col)?)?;
    }
    Ok((panel, components))
}
