//! ARMA(1,1) with mean, fitted by exact Gaussian likelihood.
//!
//! The likelihood uses the innovations recursion specialised to ARMA(1,1):
//! with `r_0 = (1 + 2θφ + θ²)/(1 − φ²)` and, for `n ≥ 1`,
//! `θ_n = θ / r_{n−1}`, `r_n = 1 + θ² − θ²/r_{n−1}`, the one-step predictors of
//! the demeaned series are `X̂_1 = 0`, `X̂_{n+1} = φX_n + θ_n(X_n − X̂_n)` with
//! mean-square errors `σ² r_{n−1}`. σ² is concentrated out.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{self, SimplexOptions};
use crate::series::DailySeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArimaFit {
    pub phi: f64,
    pub theta: f64,
    pub mu: f64,
    pub sigma2: f64,
    pub loglik: f64,
    pub n: usize,
}

pub const MIN_OBSERVATIONS: usize = 10;

/// Output of the recursion on a demeaned series.
struct Innovations {
    /// Sum of `e_j² / r_{j−1}`.
    weighted_ss: f64,
    sum_log_r: f64,
    /// Predictor of the next (unobserved) value.
    next: f64,
}

fn innovations(z: &[f64], phi: f64, theta: f64) -> Innovations {
    let mut r = (1.0 + 2.0 * theta * phi + theta * theta) / (1.0 - phi * phi);
    let mut pred = 0.0;
    let mut weighted_ss = 0.0;
    let mut sum_log_r = 0.0;
    for &x in z {
        let e = x - pred;
        weighted_ss += e * e / r;
        sum_log_r += r.ln();
        let theta_n = theta / r;
        pred = phi * x + theta_n * e;
        r = 1.0 + theta * theta - theta * theta / r;
    }
    Innovations {
        weighted_ss,
        sum_log_r,
        next: pred,
    }
}

/// Concentrated Gaussian log-likelihood and the implied σ².
fn profile(x: &[f64], phi: f64, theta: f64, mu: f64) -> (f64, f64) {
    let z: Vec<f64> = x.iter().map(|v| v - mu).collect();
    let inn = innovations(&z, phi, theta);
    let n = x.len() as f64;
    let sigma2 = inn.weighted_ss / n;
    let ll = -0.5 * (n * (2.0 * PI * sigma2).ln() + inn.sum_log_r + n);
    (ll, sigma2)
}

fn decode(u: &[f64]) -> (f64, f64, f64) {
    (u[0].tanh(), u[1].tanh(), u[2])
}

/// Fits on the values as one contiguous stretch.
pub fn arima_fit_values(x: &[f64]) -> Result<ArimaFit> {
    if x.len() < MIN_OBSERVATIONS {
        return Err(Error::InsufficientData(format!(
            "ARMA(1,1) needs >= {MIN_OBSERVATIONS} values, got {}",
            x.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ARMA input".into()));
    }
    let mean = crate::stats::mean(x);
    let sd = crate::stats::sample_sd(x);
    if !(sd > 1e-12 * mean.abs().max(1.0)) {
        return Err(Error::Degenerate("zero-variance series: likelihood is degenerate".into()));
    }
    let objective = |u: &[f64]| {
        let (phi, theta, mu) = decode(u);
        if phi.abs() >= 1.0 || theta.abs() >= 1.0 {
            return f64::INFINITY;
        }
        let (ll, s2) = profile(x, phi, theta, mu);
        if s2 > 0.0 {
            -ll
        } else {
            f64::INFINITY
        }
    };
    let opts = SimplexOptions {
        max_iter: 4000,
        f_tol: 1e-12,
        x_tol: 1e-9,
    };
    let step = [0.3, 0.3, 0.5 * sd];
    // coarse grid of starts; the likelihood surface can have separate AR- and MA-dominated modes
    let mut best: Option<optim::Minimum> = None;
    for &(p0, t0) in &[(0.0, 0.0), (0.5, 0.0), (-0.5, 0.0), (0.0, 0.5), (0.0, -0.5), (0.8, -0.3)] {
        let u0 = [f64::atanh(p0), f64::atanh(t0), mean];
        let run = optim::nelder_mead(objective, &u0, &step, opts);
        if best.as_ref().is_none_or(|b| run.f < b.f) {
            best = Some(run);
        }
    }
    let best = best.expect("starts are non-empty");
    let polished = optim::nelder_mead(objective, &best.x, &step, opts);
    let best = if polished.f <= best.f { polished } else { best };
    let (phi, theta, mu) = decode(&best.x);
    let (loglik, sigma2) = profile(x, phi, theta, mu);
    if !loglik.is_finite() {
        return Err(Error::Degenerate("ARMA likelihood is not finite".into()));
    }
    Ok(ArimaFit {
        phi,
        theta,
        mu,
        sigma2,
        loglik,
        n: x.len(),
    })
}

/// Fits on the trailing run of non-missing values.
pub fn arima_fit(x: &DailySeries) -> Result<ArimaFit> {
    arima_fit_values(&trailing_run(x))
}

fn trailing_run(x: &DailySeries) -> Vec<f64> {
    let mut run: Vec<f64> = x.values().iter().rev().map_while(|v| *v).collect();
    run.reverse();
    run
}

/// One-step conditional mean after `history` (demeaned by `fit.mu`).
pub fn arima_forecast_values(fit: &ArimaFit, history: &[f64]) -> Result<f64> {
    if history.is_empty() {
        return Err(Error::EmptyInput("ARMA forecast history"));
    }
    let z: Vec<f64> = history.iter().map(|v| v - fit.mu).collect();
    Ok(fit.mu + innovations(&z, fit.phi, fit.theta).next)
}

/// [`arima_forecast_values`] on the trailing non-missing run of `history`.
pub fn arima_forecast_one(fit: &ArimaFit, history: &DailySeries) -> Result<f64> {
    arima_forecast_values(fit, &trailing_run(history))
}
