//! Maximum-likelihood estimation of a compiled RAM model.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{compile_model, Matrix, Op, RamModel, SemModel};
use crate::error::{Error, Result};
use crate::optim::{self, QuasiNewtonOptions};
use crate::series::Panel;
use crate::stats::{normal_two_sided_p, stars};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SemConfig {
    pub multistarts: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub grad_tol: f64,
}

impl Default for SemConfig {
    fn default() -> Self {
        Self {
            multistarts: 4,
            seed: 20_201_015,
            max_iter: 2000,
            grad_tol: 1e-6,
        }
    }
}

/// `log det Σ + tr(SΣ⁻¹) − log det S − p`; `+∞` unless `Σ` is positive definite.
pub fn fml(s: &DMatrix<f64>, sigma: &DMatrix<f64>) -> f64 {
    let p = s.nrows();
    let (Some(cs), Some(cz)) = (s.clone().cholesky(), sigma.clone().cholesky()) else {
        return f64::INFINITY;
    };
    let logdet = |l: &DMatrix<f64>| 2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let trace = cz.solve(s).trace();
    logdet(&cz.l()) + trace - logdet(&cs.l()) - p as f64
}

impl RamModel {
    pub fn discrepancy(&self, s: &DMatrix<f64>, theta: &[f64]) -> f64 {
        match self.implied(theta) {
            Some(sigma) => fml(s, &sigma),
            None => f64::INFINITY,
        }
    }

    /// Analytic gradient of [`fml`] in θ. With `W = Σ⁻¹ − Σ⁻¹SΣ⁻¹`,
    /// `B = (I − A)⁻¹`, `G = FB`: `∂/∂A_ij = 2 (BΩGᵀ W G)_ji` and
    /// `∂/∂Ω_ij = (2 − δ_ij)(Gᵀ W G)_ij`.
    pub fn gradient(&self, s: &DMatrix<f64>, theta: &[f64]) -> Vec<f64> {
        let nan = || vec![f64::NAN; theta.len()];
        let (a, omega) = self.matrices(theta);
        let m = a.nrows();
        let Some(b) = (DMatrix::identity(m, m) - &a).try_inverse() else {
            return nan();
        };
        let g = b.rows(0, self.n_observed).into_owned();
        let sigma = &g * &omega * g.transpose();
        let Some(chol) = sigma.cholesky() else {
            return nan();
        };
        let inv = chol.inverse();
        let w = &inv - &inv * s * &inv;
        let wg = &w * &g;
        let n_mat = g.transpose() * &wg;
        let m_mat = &b * &omega * g.transpose() * &wg;
        self.params
            .iter()
            .map(|q| match q.matrix {
                Matrix::A => 2.0 * m_mat[(q.col, q.row)],
                Matrix::Omega if q.row == q.col => n_mat[(q.row, q.row)],
                Matrix::Omega => 2.0 * n_mat[(q.row, q.col)],
            })
            .collect()
    }

    /// Reflects latents whose first listed loading came out negative; the
    /// implied covariance is unchanged.
    fn orient(&self, theta: &mut [f64]) {
        let mut sign = vec![1.0; self.names.len()];
        for &(latent, k) in &self.sign_anchors {
            if theta[k] < 0.0 {
                sign[latent] = -1.0;
            }
        }
        for (q, v) in self.params.iter().zip(theta.iter_mut()) {
            if q.row != q.col {
                *v *= sign[q.row] * sign[q.col];
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub lhs: String,
    pub op: Op,
    pub rhs: String,
    pub value: f64,
    pub std_error: Option<f64>,
}

impl Estimate {
    pub fn z(&self) -> Option<f64> {
        self.std_error.filter(|s| *s > 0.0).map(|s| self.value / s)
    }

    pub fn p_value(&self) -> Option<f64> {
        self.z().map(normal_two_sided_p)
    }

    pub fn stars(&self) -> &'static str {
        self.p_value().map_or("", stars)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemFit {
    pub estimates: Vec<Estimate>,
    /// `None` when the Hessian at the optimum is not positive definite.
    pub std_errors_available: bool,
    pub fml: f64,
    /// `(n − 1) · fml`.
    pub chi_square: f64,
    pub degrees_of_freedom: i64,
    pub converged: bool,
    pub n: usize,
    /// Variances estimated below zero.
    pub heywood: Vec<String>,
}

impl SemFit {
    pub fn get(&self, lhs: &str, op: Op, rhs: &str) -> Option<&Estimate> {
        self.estimates.iter().find(|e| {
            e.op == op && ((e.lhs == lhs && e.rhs == rhs) || (op == Op::Covariance && e.lhs == rhs && e.rhs == lhs))
        })
    }
}

/// Correlation matrix of the observed columns over dates where all are present.
pub fn sample_covariance(panel: &Panel, observed: &[String]) -> Result<(DMatrix<f64>, usize)> {
    let cols: Vec<&[Option<f64>]> = observed.iter().map(|n| panel.values(n)).collect::<Result<_>>()?;
    let rows: Vec<usize> = (0..panel.n_dates())
        .filter(|&i| cols.iter().all(|c| c[i].is_some()))
        .collect();
    let n = rows.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("{n} complete rows for the SEM variables")));
    }
    let p = observed.len();
    let mut data = DMatrix::from_fn(n, p, |r, j| cols[j][rows[r]].unwrap());
    for (j, mut col) in data.column_iter_mut().enumerate() {
        let m = col.sum() / n as f64;
        col.add_scalar_mut(-m);
        let sd = (col.norm_squared() / n as f64).sqrt();
        if !(sd > 1e-13 * m.abs().max(1.0)) {
            return Err(Error::Degenerate(format!("`{}` is constant over the complete rows", observed[j])));
        }
        col /= sd;
    }
    Ok((data.transpose() * &data / n as f64, n))
}

/// Listwise-complete, standardized fit of `model` on the panel columns.
pub fn fit_sem(model: &SemModel, panel: &Panel, cfg: &SemConfig) -> Result<SemFit> {
    let (s, n) = sample_covariance(panel, &model.observed)?;
    fit_sem_cov(model, &s, n, cfg)
}

/// Fit to a given sample covariance (rows/columns in `model.observed` order).
pub fn fit_sem_cov(model: &SemModel, s: &DMatrix<f64>, n: usize, cfg: &SemConfig) -> Result<SemFit> {
    let ram = compile_model(model)?;
    let p = ram.n_observed;
    if s.nrows() != p || s.ncols() != p {
        return Err(Error::InvalidParameter(format!("covariance is {}x{}, model has {p} observed", s.nrows(), s.ncols())));
    }
    if s.clone().cholesky().is_none() {
        return Err(Error::Degenerate("sample covariance is not positive definite".into()));
    }
    let q = ram.n_params();
    if n <= q {
        return Err(Error::InsufficientData(format!("n = {n} does not exceed the {q} free parameters")));
    }
    let rank = ram.jacobian_rank(cfg.seed);
    if rank < q {
        return Err(Error::Model(format!("model is not identified: Jacobian rank {rank} < {q} parameters")));
    }

    let opts = QuasiNewtonOptions {
        max_iter: cfg.max_iter,
        grad_tol: cfg.grad_tol,
    };
    let runs: Vec<optim::Minimum> = (0..cfg.multistarts.max(1))
        .into_par_iter()
        .map(|k| {
            let x0 = ram.start(s, k, cfg.seed);
            optim::bfgs(|t| ram.discrepancy(s, t), |t| ram.gradient(s, t), &x0, opts)
        })
        .collect();
    let best = runs
        .into_iter()
        .reduce(|a, b| if b.f < a.f { b } else { a })
        .expect("at least one start");
    if !best.f.is_finite() {
        return Err(Error::Degenerate("no start reached a positive-definite implied covariance".into()));
    }
    let mut theta = best.x;
    ram.orient(&mut theta);
    let f = ram.discrepancy(s, &theta);

    let hess = {
        let h = 1e-5;
        let mut hm = DMatrix::zeros(q, q);
        let mut t = theta.clone();
        for k in 0..q {
            t[k] = theta[k] + h;
            let up = ram.gradient(s, &t);
            t[k] = theta[k] - h;
            let down = ram.gradient(s, &t);
            t[k] = theta[k];
            for j in 0..q {
                hm[(j, k)] = (up[j] - down[j]) / (2.0 * h);
            }
        }
        (&hm + hm.transpose()) * 0.5
    };
    let cov = optim::spd_inverse(&hess).map(|inv| inv * (2.0 / n as f64));

    let estimates: Vec<Estimate> = ram
        .params
        .iter()
        .enumerate()
        .map(|(k, par)| Estimate {
            lhs: par.lhs.clone(),
            op: par.op,
            rhs: par.rhs.clone(),
            value: theta[k],
            std_error: cov.as_ref().map(|c| c[(k, k)].sqrt()).filter(|v| v.is_finite()),
        })
        .collect();
    let heywood = ram
        .params
        .iter()
        .zip(&theta)
        .filter(|(par, v)| par.is_variance() && **v < 0.0)
        .map(|(par, _)| par.lhs.clone())
        .collect();
    Ok(SemFit {
        estimates,
        std_errors_available: cov.is_some(),
        fml: f,
        chi_square: (n as f64 - 1.0) * f,
        degrees_of_freedom: (p * (p + 1) / 2) as i64 - q as i64,
        converged: best.converged,
        n,
        heywood,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fml_reference_values() {
        let s = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        assert!(fml(&s, &s).abs() < 1e-14);
        let c = 2.5;
        let p = 3.0;
        let v = fml(&DMatrix::identity(3, 3), &(DMatrix::identity(3, 3) * c));
        assert!((v - p * (c.ln() + 1.0 / c - 1.0)).abs() < 1e-14);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert_eq!(fml(&s, &bad), f64::INFINITY);
    }

    #[test]
    fn saturated_model_fits_exactly() {
        let model = SemModel::parse("a ~~ b + c\nb ~~ c").unwrap();
        let s = DMatrix::from_row_slice(3, 3, &[1.0, 0.4, -0.2, 0.4, 1.0, 0.1, -0.2, 0.1, 1.0]);
        let fit = fit_sem_cov(&model, &s, 100, &SemConfig::default()).unwrap();
        assert!(fit.fml < 1e-8);
        assert_eq!(fit.degrees_of_freedom, 0);
        assert!((fit.get("b", Op::Covariance, "a").unwrap().value - 0.4).abs() < 1e-5);
    }
}
