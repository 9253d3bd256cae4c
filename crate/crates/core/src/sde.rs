//! Mean-reverting diffusions `dX = α(β − X)dt + σ b(X) dW` with
//! `b(x) = 1, x, √x, x^γ` (Vasicek, GBM, CIR, CKLS).
//!
//! Calibration maximizes the Euler quasi-likelihood: each observed transition
//! `x_i → x_{i+1}` is scored as a Gaussian with mean `x_i + α(β − x_i)Δ` and
//! variance `σ² b(x_i)² Δ`. Time advances by `Δ` per observation; missing
//! values split the series into runs and no transition crosses a gap.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{self, SimplexOptions};
use crate::rng;
use crate::series::{consecutive_days, DailySeries};

/// Reflection floor for simulated positive-state paths.
pub const POSITIVE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SdeModelKind {
    Vas,
    Gbm,
    Cir,
    Ckls,
}

impl SdeModelKind {
    pub const ALL: [SdeModelKind; 4] = [Self::Vas, Self::Gbm, Self::Cir, Self::Ckls];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Vas => "VAS",
            Self::Gbm => "GBM",
            Self::Cir => "CIR",
            Self::Ckls => "CKLS",
        }
    }

    /// Diffusion exponent implied by the model; `None` when it is estimated.
    pub fn implied_gamma(self) -> Option<f64> {
        match self {
            Self::Vas => Some(0.0),
            Self::Cir => Some(0.5),
            Self::Gbm => Some(1.0),
            Self::Ckls => None,
        }
    }

    pub fn n_params(self) -> usize {
        if self == Self::Ckls {
            4
        } else {
            3
        }
    }

    pub fn requires_positive_state(self) -> bool {
        self != Self::Vas
    }
}

impl fmt::Display for SdeModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SdeModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown SDE model `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdeParams {
    /// Mean-reversion speed per unit time.
    pub alpha: f64,
    /// Long-run mean.
    pub beta: f64,
    pub sigma: f64,
    /// Diffusion exponent; only meaningful for CKLS.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

impl SdeParams {
    pub fn new(alpha: f64, beta: f64, sigma: f64) -> Result<Self> {
        Self::validated(alpha, beta, sigma, None)
    }

    pub fn with_gamma(alpha: f64, beta: f64, sigma: f64, gamma: f64) -> Result<Self> {
        Self::validated(alpha, beta, sigma, Some(gamma))
    }

    fn validated(alpha: f64, beta: f64, sigma: f64, gamma: Option<f64>) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha must be > 0, got {alpha}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma must be > 0, got {sigma}")));
        }
        if !beta.is_finite() {
            return Err(Error::InvalidParameter("beta must be finite".into()));
        }
        if let Some(g) = gamma {
            if !(0.0..2.0).contains(&g) {
                return Err(Error::InvalidParameter(format!("gamma must lie in [0, 2), got {g}")));
            }
        }
        Ok(Self {
            alpha,
            beta,
            sigma,
            gamma,
        })
    }

    /// Effective diffusion exponent under `kind`.
    fn exponent(&self, kind: SdeModelKind) -> Result<f64> {
        match kind.implied_gamma() {
            Some(g) => Ok(g),
            None => self
                .gamma
                .ok_or_else(|| Error::InvalidParameter("CKLS requires gamma".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdeConfig {
    /// Sampling interval between consecutive observations, in time units.
    pub delta: f64,
    /// Iteration budget per simplex run.
    pub max_iter: usize,
    /// Number of simplex starts (the first is the closed-form start).
    pub multistarts: usize,
    pub seed: u64,
}

impl Default for SdeConfig {
    fn default() -> Self {
        Self {
            delta: 1.0 / 365.0,
            max_iter: 5000,
            multistarts: 8,
            seed: 20_201_015,
        }
    }
}

impl SdeConfig {
    fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidParameter(format!("delta must be > 0, got {}", self.delta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdeStdErrors {
    pub alpha: f64,
    pub beta: f64,
    pub sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdeFit {
    pub kind: SdeModelKind,
    pub params: SdeParams,
    /// `None` when the numerical Hessian is not positive definite.
    pub std_errors: Option<SdeStdErrors>,
    pub loglik: f64,
    pub aic: f64,
    pub converged: bool,
    pub n_transitions: usize,
}

fn diffusion(x: f64, gamma: f64) -> f64 {
    if gamma == 0.0 {
        1.0
    } else if gamma == 0.5 {
        x.sqrt()
    } else if gamma == 1.0 {
        x
    } else {
        x.powf(gamma)
    }
}

/// Consecutive non-missing pairs by position.
fn transitions(x: &DailySeries) -> Vec<(f64, f64)> {
    x.values()
        .windows(2)
        .filter_map(|w| match (w[0], w[1]) {
            (Some(a), Some(b)) => Some((a, b)),
            _ => None,
        })
        .collect()
}

fn check_state(kind: SdeModelKind, x: &DailySeries) -> Result<()> {
    if kind.requires_positive_state() {
        if let Some((index, value)) = x
            .values()
            .iter()
            .enumerate()
            .find_map(|(i, v)| v.filter(|v| *v <= 0.0).map(|v| (i, v)))
        {
            return Err(Error::NonPositiveState { index, value });
        }
    }
    Ok(())
}

fn loglik_transitions(pairs: &[(f64, f64)], alpha: f64, beta: f64, sigma: f64, gamma: f64, delta: f64) -> f64 {
    let s2 = sigma * sigma * delta;
    let mut ll = 0.0;
    for &(a, b) in pairs {
        let mean = a + alpha * (beta - a) * delta;
        let var = s2 * diffusion(a, gamma).powi(2);
        if !(var > 0.0) || !var.is_finite() {
            return f64::NEG_INFINITY;
        }
        let r = b - mean;
        ll += -0.5 * (2.0 * PI * var).ln() - r * r / (2.0 * var);
    }
    ll
}

/// Euler quasi-log-likelihood of `x` under `kind` at `params`.
pub fn quasi_loglik(kind: SdeModelKind, params: &SdeParams, x: &DailySeries, cfg: &SdeConfig) -> Result<f64> {
    cfg.validate()?;
    if !(params.sigma > 0.0) {
        return Err(Error::InvalidParameter("non-positive diffusion variance".into()));
    }
    let gamma = params.exponent(kind)?;
    check_state(kind, x)?;
    let pairs = transitions(x);
    if pairs.is_empty() {
        return Err(Error::InsufficientData("need two consecutive observations".into()));
    }
    let ll = loglik_transitions(&pairs, params.alpha, params.beta, params.sigma, gamma, cfg.delta);
    if ll.is_finite() {
        Ok(ll)
    } else {
        Err(Error::InvalidParameter("non-positive diffusion variance".into()))
    }
}

/// Weighted least-squares profile start for fixed `gamma`: regress increments
/// on the level with weights `1 / b(x)²`. Returns `(alpha, beta, sigma)`.
fn closed_form_start(pairs: &[(f64, f64)], gamma: f64, delta: f64) -> (f64, f64, f64) {
    let (mut sw, mut swx, mut swxx, mut swy, mut swxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(a, b) in pairs {
        let w = 1.0 / diffusion(a, gamma).powi(2);
        let dy = b - a;
        sw += w;
        swx += w * a;
        swxx += w * a * a;
        swy += w * dy;
        swxy += w * a * dy;
    }
    let det = sw * swxx - swx * swx;
    let level = swx / sw;
    let (mut c0, mut c1) = if det.abs() > 1e-12 * sw * swxx.abs().max(1e-300) {
        ((swxx * swy - swx * swxy) / det, (sw * swxy - swx * swy) / det)
    } else {
        (0.0, 0.0)
    };
    // no detectable reversion: fall back to a slow pull toward the mean level
    if !(c1 < 0.0) {
        c1 = -delta;
        c0 = delta * level;
    }
    let alpha = -c1 / delta;
    let beta = c0 / (alpha * delta);
    let mut ss = 0.0;
    for &(a, b) in pairs {
        let r = b - a - c0 - c1 * a;
        ss += r * r / diffusion(a, gamma).powi(2);
    }
    let sigma = (ss / (pairs.len() as f64 * delta)).sqrt().max(1e-8);
    (alpha, beta, sigma)
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn sigmoid(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

/// Parameter vector on the unconstrained scale:
/// `[ln α, β, ln σ]` plus `logit(γ/2)` when γ is estimated.
struct Transformed<'a> {
    pairs: &'a [(f64, f64)],
    delta: f64,
    /// `Some` when γ is held fixed.
    fixed_gamma: Option<f64>,
}

impl Transformed<'_> {
    fn decode(&self, u: &[f64]) -> (f64, f64, f64, f64) {
        let gamma = self.fixed_gamma.unwrap_or_else(|| 2.0 * sigmoid(u[3]));
        (u[0].exp(), u[1], u[2].exp(), gamma)
    }

    fn neg_loglik(&self, u: &[f64]) -> f64 {
        let (a, b, s, g) = self.decode(u);
        if !(a.is_finite() && s > 0.0 && s.is_finite()) {
            return f64::INFINITY;
        }
        -loglik_transitions(self.pairs, a, b, s, g, self.delta)
    }
}

/// Quasi-maximum-likelihood fit of one model.
pub fn fit_sde(kind: SdeModelKind, x: &DailySeries, cfg: &SdeConfig) -> Result<SdeFit> {
    fit_impl(kind, x, cfg, kind.implied_gamma())
}

/// CKLS fit with the exponent held at `gamma` (used to check model nesting).
pub fn fit_ckls_fixed_gamma(x: &DailySeries, gamma: f64, cfg: &SdeConfig) -> Result<SdeFit> {
    if !(0.0..2.0).contains(&gamma) {
        return Err(Error::InvalidParameter(format!("gamma must lie in [0, 2), got {gamma}")));
    }
    let mut fit = fit_impl(SdeModelKind::Ckls, x, cfg, Some(gamma))?;
    // γ was not estimated: three free parameters
    fit.aic = -2.0 * fit.loglik + 6.0;
    Ok(fit)
}

fn fit_impl(kind: SdeModelKind, x: &DailySeries, cfg: &SdeConfig, fixed_gamma: Option<f64>) -> Result<SdeFit> {
    cfg.validate()?;
    check_state(kind, x)?;
    let pairs = transitions(x);
    if pairs.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{kind}: need at least 3 transitions, got {}",
            pairs.len()
        )));
    }
    let problem = Transformed {
        pairs: &pairs,
        delta: cfg.delta,
        fixed_gamma,
    };
    let estimate_gamma = fixed_gamma.is_none();

    // closed-form start; for free γ pick the best exponent on a coarse grid
    let start_gamma = match fixed_gamma {
        Some(g) => g,
        None => {
            let grid = [0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75];
            let score = |g: f64| {
                let (a, b, s) = closed_form_start(&pairs, g, cfg.delta);
                loglik_transitions(&pairs, a, b, s, g, cfg.delta)
            };
            grid.into_iter()
                .max_by(|a, b| score(*a).total_cmp(&score(*b)))
                .unwrap()
        }
    };
    let (a0, b0, s0) = closed_form_start(&pairs, start_gamma, cfg.delta);
    let mut base = vec![a0.ln(), b0, s0.ln()];
    if estimate_gamma {
        base.push(logit(start_gamma / 2.0));
    }

    let level_sd = {
        let lv: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        crate::stats::sample_sd(&lv).max(1e-3)
    };
    let mut step = vec![0.5, 0.2 * level_sd, 0.2];
    if estimate_gamma {
        step.push(0.5);
    }
    let opts = SimplexOptions {
        max_iter: cfg.max_iter,
        f_tol: 1e-13,
        x_tol: 1e-9,
    };

    let kind_stream = kind as u64 * 97 + fixed_gamma.map_or(0, |g| (g * 1000.0) as u64 + 1);
    let mut rng = rng::rng_for(cfg.seed, kind_stream);
    let mut best: Option<optim::Minimum> = None;
    for start in 0..cfg.multistarts.max(1) {
        let mut x0 = base.clone();
        if start > 0 {
            let z: Vec<f64> = (0..x0.len()).map(|_| rng.sample(StandardNormal)).collect();
            x0[0] += 0.5 * z[0];
            x0[1] += 0.3 * level_sd * z[1];
            x0[2] += 0.2 * z[2];
            if estimate_gamma {
                x0[3] += 0.5 * z[3];
            }
        }
        let run = optim::nelder_mead(|u| problem.neg_loglik(u), &x0, &step, opts);
        if best.as_ref().is_none_or(|b| run.f < b.f) {
            best = Some(run);
        }
    }
    let mut best = best.expect("at least one start");
    // one restart from the best vertex guards against simplex collapse
    let polished = optim::nelder_mead(|u| problem.neg_loglik(u), &best.x, &step, opts);
    if polished.f <= best.f {
        best = optim::Minimum {
            converged: polished.converged,
            ..polished
        };
    }

    let (alpha, beta, sigma, gamma) = problem.decode(&best.x);
    let loglik = -best.f;
    if !loglik.is_finite() {
        return Err(Error::Degenerate(format!("{kind}: likelihood is not finite at the optimum")));
    }
    let params = SdeParams {
        alpha,
        beta,
        sigma,
        gamma: if kind == SdeModelKind::Ckls { Some(gamma) } else { None },
    };
    let std_errors = standard_errors(&problem, &best.x, estimate_gamma);
    let k = kind.n_params() as f64;
    Ok(SdeFit {
        kind,
        params,
        std_errors,
        loglik,
        aic: -2.0 * loglik + 2.0 * k,
        converged: best.converged,
        n_transitions: pairs.len(),
    })
}

/// Inverse central-difference Hessian (step 1e-4, transformed scale),
/// back-transformed with the delta method.
fn standard_errors(problem: &Transformed<'_>, u: &[f64], estimate_gamma: bool) -> Option<SdeStdErrors> {
    let hess = optim::central_hessian(|v| problem.neg_loglik(v), u, 1e-4);
    let cov = optim::spd_inverse(&hess)?;
    let se: Vec<f64> = (0..u.len()).map(|i| cov[(i, i)].sqrt()).collect();
    if se.iter().any(|s| !s.is_finite()) {
        return None;
    }
    let (alpha, _, sigma, _) = problem.decode(u);
    let gamma = estimate_gamma.then(|| {
        let s = sigmoid(u[3]);
        2.0 * s * (1.0 - s) * se[3]
    });
    Some(SdeStdErrors {
        alpha: alpha * se[0],
        beta: se[1],
        sigma: sigma * se[2],
        gamma,
    })
}

/// Outcome of one candidate in [`select_model`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub kind: SdeModelKind,
    pub fit: Option<SdeFit>,
    /// Why the model was excluded, when it was.
    pub excluded: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSelection {
    pub best: SdeModelKind,
    pub candidates: Vec<Candidate>,
}

impl ModelSelection {
    pub fn fit(&self, kind: SdeModelKind) -> Option<&SdeFit> {
        self.candidates
            .iter()
            .find(|c| c.kind == kind)
            .and_then(|c| c.fit.as_ref())
    }
}

/// Fits all four models and picks the lowest AIC, breaking ties toward fewer
/// parameters. Models whose preconditions fail are excluded and flagged.
pub fn select_model(x: &DailySeries, cfg: &SdeConfig) -> Result<ModelSelection> {
    let candidates: Vec<Candidate> = SdeModelKind::ALL
        .into_iter()
        .map(|kind| match fit_sde(kind, x, cfg) {
            Ok(fit) => Candidate {
                kind,
                fit: Some(fit),
                excluded: None,
            },
            Err(e) => Candidate {
                kind,
                fit: None,
                excluded: Some(e.to_string()),
            },
        })
        .collect();
    let best = candidates
        .iter()
        .filter_map(|c| c.fit.as_ref())
        .min_by(|a, b| {
            a.aic
                .total_cmp(&b.aic)
                .then(a.kind.n_params().cmp(&b.kind.n_params()))
        })
        .map(|f| f.kind)
        .ok_or_else(|| {
            let reasons: Vec<String> = candidates
                .iter()
                .map(|c| format!("{}: {}", c.kind, c.excluded.as_deref().unwrap_or("?")))
                .collect();
            Error::Degenerate(format!("no SDE model could be fitted ({})", reasons.join("; ")))
        })?;
    Ok(ModelSelection { best, candidates })
}

/// Euler–Maruyama path of `n` steps starting at `x0` (returns `n + 1` values).
/// Positive-state models reflect at [`POSITIVE_FLOOR`].
pub fn simulate_path(
    kind: SdeModelKind,
    params: &SdeParams,
    x0: f64,
    n: usize,
    cfg: &SdeConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let gamma = params.exponent(kind)?;
    if kind.requires_positive_state() && !(x0 > 0.0) {
        return Err(Error::NonPositiveState { index: 0, value: x0 });
    }
    let mut rng = rng::rng_for(seed, 0x5DE);
    let sqrt_dt = cfg.delta.sqrt();
    let mut path = Vec::with_capacity(n + 1);
    let mut x = x0;
    path.push(x);
    for _ in 0..n {
        let z: f64 = rng.sample(StandardNormal);
        x = x + params.alpha * (params.beta - x) * cfg.delta + params.sigma * diffusion(x, gamma) * sqrt_dt * z;
        if kind.requires_positive_state() && x < POSITIVE_FLOOR {
            x = 2.0 * POSITIVE_FLOOR - x;
        }
        path.push(x);
    }
    Ok(path)
}

/// [`simulate_path`] as a daily series starting on 2020-01-01.
pub fn simulate(
    kind: SdeModelKind,
    params: &SdeParams,
    x0: f64,
    n: usize,
    cfg: &SdeConfig,
    seed: u64,
) -> Result<DailySeries> {
    let path = simulate_path(kind, params, x0, n, cfg, seed)?;
    DailySeries::from_values(kind.as_str(), simulation_start(), &path)
}

pub fn simulation_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 1, 1).expect("valid date")
}

/// Deterministic σ → 0 solution `β + (x0 − β) e^{−α t}` at the given times.
pub fn limit_trajectory(params: &SdeParams, x0: f64, times: &[f64]) -> Vec<f64> {
    times
        .iter()
        .map(|t| params.beta + (x0 - params.beta) * (-params.alpha * t).exp())
        .collect()
}

/// Limit trajectory on consecutive days from `start`, one `Δ` per day.
pub fn limit_path(params: &SdeParams, x0: f64, start: NaiveDate, n: usize, cfg: &SdeConfig) -> Result<DailySeries> {
    let times: Vec<f64> = (0..n).map(|i| i as f64 * cfg.delta).collect();
    let values: Vec<Option<f64>> = limit_trajectory(params, x0, &times).into_iter().map(Some).collect();
    DailySeries::new("limit", consecutive_days(start, n), values)
}
