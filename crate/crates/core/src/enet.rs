//! Elastic-net least squares by cyclic coordinate descent.
//!
//! Objective: `(1/2n)‖y − b₀ − Xβ‖² + λ((1−α)/2 ‖β‖² + α‖β‖₁)`. The intercept
//! is never penalized: `X` columns and `y` are centered before the descent and
//! `b₀` is recovered afterwards. On a standardized design the centering is a
//! no-op and the coordinate update reduces to `S(z, λα) / (1 + λ(1−α))`.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Floor applied to α when computing `λ_max`, so a pure-ridge grid still has a scale.
pub const RIDGE_ALPHA_FLOOR: f64 = 0.001;

#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    names: Vec<String>,
    data: DMatrix<f64>,
    standardized: bool,
}

impl DesignMatrix {
    pub fn new(names: Vec<String>, data: DMatrix<f64>) -> Result<Self> {
        if names.len() != data.ncols() {
            return Err(Error::InvalidParameter(format!(
                "{} names for {} columns",
                names.len(),
                data.ncols()
            )));
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::DuplicateName(n.clone()));
            }
        }
        if data.nrows() < 2 {
            return Err(Error::InsufficientData(format!("design needs >= 2 rows, got {}", data.nrows())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("design matrix".into()));
        }
        Ok(Self {
            names,
            data,
            standardized: false,
        })
    }

    /// Builds from equally long columns.
    pub fn from_columns(names: Vec<String>, columns: &[Vec<f64>]) -> Result<Self> {
        let n = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::InvalidParameter("columns differ in length".into()));
        }
        let data = DMatrix::from_fn(n, columns.len(), |i, j| columns[j][i]);
        Self::new(names, data)
    }

    /// Centers each column and scales it to unit mean square (`(1/n)‖x_j‖² = 1`).
    /// Returns the column means and scales used.
    pub fn standardize(mut self) -> Result<(Self, Vec<f64>, Vec<f64>)> {
        let n = self.nrows() as f64;
        let mut means = Vec::with_capacity(self.ncols());
        let mut scales = Vec::with_capacity(self.ncols());
        for (j, mut col) in self.data.column_iter_mut().enumerate() {
            let m = col.sum() / n;
            let ms = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            let s = ms.sqrt();
            if !(s > 1e-13 * m.abs().max(1.0)) {
                return Err(Error::Degenerate(format!("column `{}` has zero variance", self.names[j])));
            }
            col.apply(|v| *v = (*v - m) / s);
            means.push(m);
            scales.push(s);
        }
        self.standardized = true;
        Ok((self, means, scales))
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn nrows(&self) -> usize {
        self.data.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    /// Subset of rows, in the given order. The standardized flag is dropped
    /// since a row subset is no longer exactly standardized.
    pub fn rows(&self, idx: &[usize]) -> Result<Self> {
        let data = DMatrix::from_fn(idx.len(), self.ncols(), |i, j| self.data[(idx[i], j)]);
        Self::new(self.names.clone(), data)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnetConfig {
    /// Mixing weight: 1 is the lasso, 0 is ridge.
    pub mix_alpha: f64,
    /// Strictly descending λ values; `None` builds the automatic grid.
    pub lambda_grid: Option<Vec<f64>>,
    pub grid_len: usize,
    /// Smallest automatic λ as a fraction of `λ_max`.
    pub grid_ratio: f64,
    /// Stop when no coefficient moves by more than this in a full pass.
    pub tolerance: f64,
    pub max_passes: usize,
}

impl Default for EnetConfig {
    fn default() -> Self {
        Self {
            mix_alpha: 0.5,
            lambda_grid: None,
            grid_len: 100,
            grid_ratio: 1e-3,
            tolerance: 1e-7,
            max_passes: 100_000,
        }
    }
}

impl EnetConfig {
    pub fn with_alpha(mix_alpha: f64) -> Self {
        Self {
            mix_alpha,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.mix_alpha) {
            return Err(Error::InvalidParameter(format!("mix_alpha must lie in [0, 1], got {}", self.mix_alpha)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter("tolerance must be > 0".into()));
        }
        if let Some(grid) = &self.lambda_grid {
            if grid.is_empty() || grid.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
                return Err(Error::InvalidParameter("lambda grid must be non-empty and non-negative".into()));
            }
            if grid.windows(2).any(|w| w[1] >= w[0]) {
                return Err(Error::InvalidParameter("lambda grid must be strictly descending".into()));
            }
        }
        if self.lambda_grid.is_none() && (self.grid_len < 1 || !(self.grid_ratio > 0.0 && self.grid_ratio < 1.0)) {
            return Err(Error::InvalidParameter("automatic grid needs grid_len >= 1 and 0 < grid_ratio < 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnetSolution {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub mix_alpha: f64,
    pub converged: bool,
    pub passes: usize,
}

impl EnetSolution {
    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|j| self.coefficients[j])
    }

    /// Names with nonzero coefficients, in column order.
    pub fn selected(&self) -> Vec<&str> {
        self.names
            .iter()
            .zip(&self.coefficients)
            .filter(|(_, b)| **b != 0.0)
            .map(|(n, _)| n.as_str())
            .collect()
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.intercept + x.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum::<f64>()
    }
}

pub fn soft_threshold(z: f64, g: f64) -> f64 {
    debug_assert!(g >= 0.0);
    if z > g {
        z - g
    } else if z < -g {
        z + g
    } else {
        0.0
    }
}

fn check_response(x: &DesignMatrix, y: &[f64]) -> Result<()> {
    if y.len() != x.nrows() {
        return Err(Error::InvalidParameter(format!("{} responses for {} rows", y.len(), x.nrows())));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("response".into()));
    }
    Ok(())
}

/// Centered copy of the design and response, with the means removed.
struct Centered {
    x: DMatrix<f64>,
    y: DVector<f64>,
    x_means: Vec<f64>,
    y_mean: f64,
    /// `(1/n)‖x_j‖²` of the centered columns.
    sq_norms: Vec<f64>,
}

impl Centered {
    fn new(x: &DesignMatrix, y: &[f64]) -> Self {
        let n = x.nrows() as f64;
        let mut xc = x.data.clone();
        let mut x_means = Vec::with_capacity(x.ncols());
        let mut sq_norms = Vec::with_capacity(x.ncols());
        for mut col in xc.column_iter_mut() {
            let m = col.sum() / n;
            col.add_scalar_mut(-m);
            sq_norms.push(col.norm_squared() / n);
            x_means.push(m);
        }
        let y_mean = y.iter().sum::<f64>() / n;
        let yc = DVector::from_iterator(y.len(), y.iter().map(|v| v - y_mean));
        Self {
            x: xc,
            y: yc,
            x_means,
            y_mean,
            sq_norms,
        }
    }

    fn n(&self) -> f64 {
        self.x.nrows() as f64
    }

    /// `max_j |(1/n) x_j'y|`.
    fn max_correlation(&self) -> f64 {
        (self.x.transpose() * &self.y / self.n()).amax()
    }
}

/// Smallest λ at which every coefficient is zero, with α floored at
/// [`RIDGE_ALPHA_FLOOR`].
pub fn lambda_max(x: &DesignMatrix, y: &[f64], mix_alpha: f64) -> Result<f64> {
    check_response(x, y)?;
    Ok(Centered::new(x, y).max_correlation() / mix_alpha.max(RIDGE_ALPHA_FLOOR))
}

/// `len` values log-spaced from `lambda_max` down to `ratio · lambda_max`.
pub fn lambda_grid(lambda_max: f64, len: usize, ratio: f64) -> Result<Vec<f64>> {
    if !(lambda_max > 0.0 && lambda_max.is_finite()) {
        return Err(Error::Degenerate(format!("lambda_max = {lambda_max}: response has no linear signal")));
    }
    if len == 1 {
        return Ok(vec![lambda_max]);
    }
    let (hi, lo) = (lambda_max.ln(), (lambda_max * ratio).ln());
    Ok((0..len)
        .map(|i| (hi + (lo - hi) * i as f64 / (len - 1) as f64).exp())
        .collect())
}

/// The grid `cfg` describes for this data.
pub fn grid_for(x: &DesignMatrix, y: &[f64], cfg: &EnetConfig) -> Result<Vec<f64>> {
    match &cfg.lambda_grid {
        Some(g) => Ok(g.clone()),
        None => lambda_grid(lambda_max(x, y, cfg.mix_alpha)?, cfg.grid_len, cfg.grid_ratio),
    }
}

pub fn enet_fit(x: &DesignMatrix, y: &[f64], lambda: f64, cfg: &EnetConfig) -> Result<EnetSolution> {
    enet_fit_from(x, y, lambda, cfg, None)
}

/// [`enet_fit`] started from `init` coefficients (warm start).
pub fn enet_fit_from(
    x: &DesignMatrix,
    y: &[f64],
    lambda: f64,
    cfg: &EnetConfig,
    init: Option<&[f64]>,
) -> Result<EnetSolution> {
    cfg.validate()?;
    check_response(x, y)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {lambda}")));
    }
    let c = Centered::new(x, y);
    Ok(descend(&c, x.names.clone(), lambda, cfg, init))
}

fn descend(c: &Centered, names: Vec<String>, lambda: f64, cfg: &EnetConfig, init: Option<&[f64]>) -> EnetSolution {
    let k = c.x.ncols();
    let n = c.n();
    let a = cfg.mix_alpha;
    let l1 = lambda * a;
    let l2 = lambda * (1.0 - a);
    let mut beta = vec![0.0; k];

    let mut passes = 0;
    let mut converged = true;
    // at or beyond the threshold the zero vector is exact; skip the descent
    let all_zero = a > 0.0 && c.max_correlation() <= l1;
    if !all_zero {
        if let Some(b0) = init {
            beta.copy_from_slice(b0);
        }
        let mut resid = &c.y - &c.x * DVector::from_column_slice(&beta);
        converged = false;
        while passes < cfg.max_passes {
            passes += 1;
            let mut max_change: f64 = 0.0;
            for j in 0..k {
                let col = c.x.column(j);
                let old = beta[j];
                let denom = c.sq_norms[j] + l2;
                let new = if denom > 0.0 {
                    let z = col.dot(&resid) / n + c.sq_norms[j] * old;
                    soft_threshold(z, l1) / denom
                } else {
                    0.0
                };
                if new != old {
                    resid.axpy(old - new, &col, 1.0);
                    beta[j] = new;
                    max_change = max_change.max((new - old).abs());
                }
            }
            if max_change < cfg.tolerance {
                converged = true;
                break;
            }
        }
    }
    let intercept = c.y_mean - c.x_means.iter().zip(&beta).map(|(m, b)| m * b).sum::<f64>();
    EnetSolution {
        names,
        coefficients: beta,
        intercept,
        lambda,
        mix_alpha: a,
        converged,
        passes,
    }
}

/// Solutions along the configured grid, each warm-started from the previous.
pub fn enet_path(x: &DesignMatrix, y: &[f64], cfg: &EnetConfig) -> Result<Vec<EnetSolution>> {
    cfg.validate()?;
    check_response(x, y)?;
    let grid = grid_for(x, y, cfg)?;
    let c = Centered::new(x, y);
    Ok(path_on(&c, x.names(), &grid, cfg))
}

fn path_on(c: &Centered, names: &[String], grid: &[f64], cfg: &EnetConfig) -> Vec<EnetSolution> {
    let mut out: Vec<EnetSolution> = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let init = out.last().map(|s| s.coefficients.clone());
        out.push(descend(c, names.to_vec(), lambda, cfg, init.as_deref()));
    }
    out
}

/// Value of the penalized objective at `(intercept, beta)`.
pub fn enet_objective(x: &DesignMatrix, y: &[f64], sol: &EnetSolution) -> f64 {
    let n = x.nrows() as f64;
    let fitted = x.data() * DVector::from_column_slice(&sol.coefficients);
    let rss: f64 = y
        .iter()
        .zip(fitted.iter())
        .map(|(yi, fi)| (yi - sol.intercept - fi).powi(2))
        .sum();
    let a = sol.mix_alpha;
    let l2: f64 = sol.coefficients.iter().map(|b| b * b).sum();
    let l1: f64 = sol.coefficients.iter().map(|b| b.abs()).sum();
    rss / (2.0 * n) + sol.lambda * ((1.0 - a) / 2.0 * l2 + a * l1)
}

/// Largest violation of the stationarity conditions; zero when they hold
/// exactly. Active coordinates need `(1/n)x_j'r = λα·sign(β_j) + λ(1−α)β_j`,
/// inactive ones `|(1/n)x_j'r| ≤ λα`.
pub fn kkt_violation(x: &DesignMatrix, y: &[f64], sol: &EnetSolution) -> f64 {
    let c = Centered::new(x, y);
    let resid = &c.y - &c.x * DVector::from_column_slice(&sol.coefficients);
    let grad = c.x.transpose() * resid / c.n();
    let l1 = sol.lambda * sol.mix_alpha;
    let l2 = sol.lambda * (1.0 - sol.mix_alpha);
    sol.coefficients
        .iter()
        .zip(grad.iter())
        .map(|(&b, &g)| {
            if b != 0.0 {
                (g - l1 * b.signum() - l2 * b).abs()
            } else {
                (g.abs() - l1).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvPoint {
    pub lambda: f64,
    pub mean_mse: f64,
    /// Standard error of the fold MSEs.
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub lambda_min: f64,
    pub curve: Vec<CvPoint>,
}

/// Seeded fold labels: a shuffled `0..n` assigned round-robin.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::rng_for(seed, 0xF01D));
    let mut label = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        label[i] = pos % folds;
    }
    label
}

/// K-fold cross-validated λ over the configured grid (computed on the full
/// data). Each fold fits a warm-started path on its training rows; the chosen
/// λ minimizes the mean held-out MSE, the larger λ winning ties.
pub fn cv_lambda(x: &DesignMatrix, y: &[f64], cfg: &EnetConfig, folds: usize, seed: u64) -> Result<CvResult> {
    cfg.validate()?;
    check_response(x, y)?;
    let n = x.nrows();
    if folds < 2 || folds > n {
        return Err(Error::InvalidParameter(format!(
            "need 2 <= folds <= n, got folds = {folds}, n = {n}"
        )));
    }
    let grid = grid_for(x, y, cfg)?;
    let labels = fold_assignment(n, folds, seed);
    let mut mse = vec![vec![0.0; folds]; grid.len()];
    for f in 0..folds {
        let train: Vec<usize> = (0..n).filter(|&i| labels[i] != f).collect();
        let test: Vec<usize> = (0..n).filter(|&i| labels[i] == f).collect();
        if train.len() < 2 {
            return Err(Error::InsufficientData(format!("fold {f} leaves {} training rows", train.len())));
        }
        let xt = x.rows(&train)?;
        let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let path = path_on(&Centered::new(&xt, &yt), x.names(), &grid, cfg);
        for (g, sol) in path.iter().enumerate() {
            let err: f64 = test
                .iter()
                .map(|&i| {
                    let row: Vec<f64> = x.data.row(i).iter().copied().collect();
                    (y[i] - sol.predict_row(&row)).powi(2)
                })
                .sum();
            mse[g][f] = err / test.len() as f64;
        }
    }
    let curve: Vec<CvPoint> = grid
        .iter()
        .zip(&mse)
        .map(|(&lambda, m)| {
            let mean = m.iter().sum::<f64>() / folds as f64;
            let var = m.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (folds - 1) as f64;
            CvPoint {
                lambda,
                mean_mse: mean,
                se: (var / folds as f64).sqrt(),
            }
        })
        .collect();
    let best = curve
        .iter()
        .enumerate()
        .fold(0, |b, (i, p)| if p.mean_mse < curve[b].mean_mse { i } else { b });
    Ok(CvResult {
        lambda_min: curve[best].lambda,
        curve,
    })
}
