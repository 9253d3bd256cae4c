//! Sliding-window one-step-ahead elastic net with an ARMA(1,1) baseline.
//!
//! For a window ending at row `t` the model regresses `y_d` on the covariates
//! at `d − 1` (plus `y_{d−1}` as `swbLag`) for the `window_len` rows
//! `d = t − window_len + 1 ..= t`, then forecasts `y_{t+1}` from row `t`.
//! Lags are by panel row, so the panel is expected to be one row per day.

use chrono::{Datelike, NaiveDate};
use indexmap::IndexMap;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::arima::{arima_fit_values, arima_forecast_values};
use super::forest::{rf_relative_rank, ForestConfig};
use crate::enet::{cv_lambda, enet_fit, DesignMatrix, EnetConfig};
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::series::Panel;

pub const LAG_NAME: &str = "swbLag";
/// Fewer admissible windows than this is an error.
pub const MIN_WINDOWS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowConfig {
    pub window_len: usize,
    pub mix_alpha: f64,
    pub folds: usize,
    pub seed: u64,
    pub include_lagged_target: bool,
    /// Regressors; `None` uses every panel column other than the target.
    pub covariates: Option<Vec<String>>,
    /// Solver and grid settings; its `mix_alpha` is replaced by the field above.
    pub enet: EnetConfig,
    pub forest: ForestConfig,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            window_len: 30,
            mix_alpha: 0.5,
            folds: 10,
            seed: 20_201_015,
            include_lagged_target: true,
            covariates: None,
            enet: EnetConfig::default(),
            forest: ForestConfig::default(),
        }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 || self.window_len < self.folds {
            return Err(Error::InvalidParameter(format!(
                "need 2 <= folds <= window_len, got folds = {}, window_len = {}",
                self.folds, self.window_len
            )));
        }
        EnetConfig {
            mix_alpha: self.mix_alpha,
            ..self.enet.clone()
        }
        .validate()
    }

    fn regressors(&self, panel: &Panel, target: &str) -> Result<Vec<String>> {
        let mut names: Vec<String> = match &self.covariates {
            Some(c) => {
                for name in c {
                    panel.values(name)?;
                }
                c.clone()
            }
            None => panel.names().filter(|n| *n != target).map(String::from).collect(),
        };
        names.retain(|n| n != target);
        if self.include_lagged_target {
            names.push(LAG_NAME.to_string());
        }
        Ok(names)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowFit {
    pub date_t: NaiveDate,
    /// Standardized coefficients for every regressor; zero means not selected.
    pub coefficients: IndexMap<String, f64>,
    pub lambda_t: f64,
    /// Forecast of the target on the day after `date_t`, in target units.
    pub forecast: f64,
    /// Realized target on the day after `date_t`, when observed.
    pub actual: Option<f64>,
    pub rf_relative_rank: IndexMap<String, f64>,
    /// Regressors left out of this window (all missing or constant).
    pub dropped: Vec<String>,
}

impl WindowFit {
    pub fn selected(&self) -> impl Iterator<Item = &str> {
        self.coefficients.iter().filter(|(_, b)| **b != 0.0).map(|(n, _)| n.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedWindow {
    pub date_t: NaiveDate,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArimaForecast {
    pub date_t: NaiveDate,
    pub forecast: f64,
    pub actual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynResult {
    pub windows: Vec<WindowFit>,
    pub skipped: Vec<SkippedWindow>,
    pub arima: Vec<ArimaForecast>,
    /// Mean squared one-step error over the compared dates.
    pub enet_mse: f64,
    pub arima_mse: f64,
    /// Dates where both forecasts and the realized value exist.
    pub n_compared: usize,
    pub selection_counts: IndexMap<String, usize>,
    pub avg_relative_rank: IndexMap<String, f64>,
}

fn window_seed(seed: u64, date: NaiveDate) -> u64 {
    derive_seed(seed, date.num_days_from_ce() as u64)
}

/// Population mean and standard deviation; `None` for a constant column.
fn scale(v: &[f64]) -> Option<(f64, f64)> {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let s = (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt();
    (s > 1e-13 * m.abs().max(1.0)).then_some((m, s))
}

/// Fits the window ending at `t`. Errors describe why the window is inadmissible.
pub fn run_window(panel: &Panel, target: &str, t: NaiveDate, cfg: &WindowConfig) -> Result<WindowFit> {
    cfg.validate()?;
    let pos = panel
        .position(t)
        .ok_or_else(|| Error::InvalidParameter(format!("{t} is not a panel date")))?;
    let regressors = cfg.regressors(panel, target)?;
    fit_at(panel, target, pos, &regressors, cfg)
}

fn fit_at(panel: &Panel, target: &str, pos: usize, regressors: &[String], cfg: &WindowConfig) -> Result<WindowFit> {
    let len = cfg.window_len;
    let date_t = panel.dates()[pos];
    if pos < len {
        return Err(Error::InsufficientData(format!("{date_t}: fewer than {len} lagged rows before t")));
    }
    let y_all = panel.values(target)?;
    let first = pos + 1 - len;
    let mut y = Vec::with_capacity(len);
    for d in first..=pos {
        y.push(y_all[d].ok_or_else(|| {
            Error::InsufficientData(format!("{date_t}: target missing on {}", panel.dates()[d]))
        })?);
    }
    let (y_mean, y_sd) =
        scale(&y).ok_or_else(|| Error::Degenerate(format!("{date_t}: zero-variance target in window")))?;
    let ys: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_sd).collect();

    let mut kept: Vec<(&String, Vec<f64>, f64)> = Vec::new();
    let mut dropped = Vec::new();
    for name in regressors {
        let column = if name == LAG_NAME { y_all } else { panel.values(name)? };
        let lagged = &column[first - 1..pos];
        let present = lagged.iter().filter(|v| v.is_some()).count();
        if present == 0 {
            dropped.push(name.clone());
            continue;
        }
        if present < len {
            return Err(Error::InsufficientData(format!("{date_t}: `{name}` partially missing in window")));
        }
        let values: Vec<f64> = lagged.iter().map(|v| v.unwrap()).collect();
        if scale(&values).is_none() {
            dropped.push(name.clone());
            continue;
        }
        let now = column[pos]
            .ok_or_else(|| Error::InsufficientData(format!("{date_t}: `{name}` missing on forecast origin")))?;
        kept.push((name, values, now));
    }
    if kept.is_empty() {
        return Err(Error::InsufficientData(format!("{date_t}: no usable regressors")));
    }
    if len * 2 < kept.len() {
        log::warn!("{date_t}: {} regressors for a {len}-row window", kept.len());
    }

    let names: Vec<String> = kept.iter().map(|(n, _, _)| (*n).clone()).collect();
    let data = DMatrix::from_fn(len, kept.len(), |i, j| kept[j].1[i]);
    let (x, means, scales) = DesignMatrix::new(names, data)?.standardize()?;
    let enet_cfg = EnetConfig {
        mix_alpha: cfg.mix_alpha,
        ..cfg.enet.clone()
    };
    let seed = window_seed(cfg.seed, date_t);
    let cv = cv_lambda(&x, &ys, &enet_cfg, cfg.folds, seed)?;
    let sol = enet_fit(&x, &ys, cv.lambda_min, &enet_cfg)?;

    let origin: Vec<f64> = kept
        .iter()
        .enumerate()
        .map(|(j, (_, _, now))| (now - means[j]) / scales[j])
        .collect();
    let forecast = y_mean + y_sd * sol.predict_row(&origin);
    let actual = y_all.get(pos + 1).copied().flatten();

    let selected = sol.selected();
    let ranks = rf_relative_rank(&x, &ys, &selected, &cfg.forest, seed);

    let mut coefficients: IndexMap<String, f64> = regressors.iter().map(|n| (n.clone(), 0.0)).collect();
    let mut rf: IndexMap<String, f64> = coefficients.clone();
    for (name, b) in sol.names.iter().zip(&sol.coefficients) {
        coefficients[name] = *b;
    }
    for (name, r) in ranks {
        rf[&name] = r;
    }
    Ok(WindowFit {
        date_t,
        coefficients,
        lambda_t: cv.lambda_min,
        forecast,
        actual,
        rf_relative_rank: rf,
        dropped,
    })
}

/// ARMA(1,1) refitted on each trailing `window_len` stretch of the target,
/// forecasting the next day. Windows with a missing value are left out.
pub fn rolling_arima(panel: &Panel, target: &str, window_len: usize) -> Result<Vec<ArimaForecast>> {
    let y = panel.values(target)?;
    let dates = panel.dates();
    let out = (window_len.max(1) - 1..y.len())
        .into_par_iter()
        .filter_map(|pos| {
            let hist: Option<Vec<f64>> = y[pos + 1 - window_len..=pos].iter().copied().collect();
            let hist = hist?;
            let fit = arima_fit_values(&hist).ok()?;
            let forecast = arima_forecast_values(&fit, &hist).ok()?;
            Some(ArimaForecast {
                date_t: dates[pos],
                forecast,
                actual: y.get(pos + 1).copied().flatten(),
            })
        })
        .collect();
    Ok(out)
}

/// Runs every window, the ARMA baseline on the same dates, and the
/// selection summaries. Windows are evaluated in parallel on the current
/// rayon pool with per-window seeds, so the result does not depend on it.
pub fn dynamic_elastic_net(panel: &Panel, target: &str, cfg: &WindowConfig) -> Result<DynResult> {
    cfg.validate()?;
    let n = panel.n_dates();
    if n < cfg.window_len + 2 {
        return Err(Error::InsufficientData(format!(
            "panel spans {n} days, need at least {}",
            cfg.window_len + 2
        )));
    }
    let regressors = cfg.regressors(panel, target)?;
    let outcomes: Vec<std::result::Result<WindowFit, SkippedWindow>> = (cfg.window_len..n)
        .into_par_iter()
        .map(|pos| {
            fit_at(panel, target, pos, &regressors, cfg).map_err(|e| SkippedWindow {
                date_t: panel.dates()[pos],
                reason: e.to_string(),
            })
        })
        .collect();
    let mut windows = Vec::new();
    let mut skipped = Vec::new();
    for o in outcomes {
        match o {
            Ok(w) => windows.push(w),
            Err(s) => skipped.push(s),
        }
    }
    if windows.len() < MIN_WINDOWS {
        return Err(Error::InsufficientData(format!(
            "only {} admissible windows (need {MIN_WINDOWS})",
            windows.len()
        )));
    }

    let arima = rolling_arima(panel, target, cfg.window_len)?;
    let arima_by_date: IndexMap<NaiveDate, &ArimaForecast> = arima.iter().map(|a| (a.date_t, a)).collect();
    let (mut se_enet, mut se_arima, mut n_compared) = (0.0, 0.0, 0usize);
    for w in &windows {
        if let (Some(actual), Some(a)) = (w.actual, arima_by_date.get(&w.date_t)) {
            se_enet += (w.forecast - actual).powi(2);
            se_arima += (a.forecast - actual).powi(2);
            n_compared += 1;
        }
    }
    if n_compared == 0 {
        return Err(Error::InsufficientData("no dates with both forecasts and a realized value".into()));
    }

    let (selection_counts, avg_relative_rank) = summarize(&regressors, &windows);
    Ok(DynResult {
        windows,
        skipped,
        arima,
        enet_mse: se_enet / n_compared as f64,
        arima_mse: se_arima / n_compared as f64,
        n_compared,
        selection_counts,
        avg_relative_rank,
    })
}

/// Per-variable selection counts and mean relative rank over all windows.
pub fn summarize(names: &[String], windows: &[WindowFit]) -> (IndexMap<String, usize>, IndexMap<String, f64>) {
    let mut counts: IndexMap<String, usize> = names.iter().map(|n| (n.clone(), 0)).collect();
    let mut ranks: IndexMap<String, f64> = names.iter().map(|n| (n.clone(), 0.0)).collect();
    for w in windows {
        for (name, b) in &w.coefficients {
            if *b != 0.0 {
                counts[name] += 1;
            }
        }
        for (name, r) in &w.rf_relative_rank {
            ranks[name] += r;
        }
    }
    let m = windows.len().max(1) as f64;
    ranks.values_mut().for_each(|r| *r /= m);
    (counts, ranks)
}
