//! Bidirectional stepwise OLS from the intercept-only model.

use indexmap::IndexMap;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::enet::DesignMatrix;
use crate::error::{Error, Result};

pub const INTERCEPT: &str = "(Intercept)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    /// `n ln(RSS/n) + 2(p + 1)`.
    #[default]
    Aic,
    /// `n ln(RSS/n) + ln(n)(p + 1)`.
    Bic,
}

impl Criterion {
    fn score(self, rss: f64, n: usize, p: usize) -> f64 {
        let nf = n as f64;
        let penalty = match self {
            Criterion::Aic => 2.0,
            Criterion::Bic => nf.ln(),
        };
        nf * (rss / nf).ln() + penalty * (p + 1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Move {
    Add(String),
    Drop(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepwiseResult {
    /// Selected predictors in the order they stand in the design.
    pub selected: Vec<String>,
    /// OLS coefficients of the final model, intercept first.
    pub coefficients: IndexMap<String, f64>,
    pub criterion: Criterion,
    pub score: f64,
    pub intercept_only_score: f64,
    pub rss: f64,
    pub r_squared: f64,
    pub n: usize,
    pub moves: Vec<Move>,
    /// Candidates skipped because they were collinear with the current model.
    pub warnings: Vec<String>,
}

struct Ols {
    coef: DVector<f64>,
    rss: f64,
}

/// OLS on an intercept plus `cols`; `None` if the columns are (numerically) collinear.
fn ols(x: &DesignMatrix, y: &DVector<f64>, cols: &[usize]) -> Option<Ols> {
    let n = x.nrows();
    let mut z = DMatrix::from_element(n, cols.len() + 1, 1.0);
    for (k, &j) in cols.iter().enumerate() {
        z.set_column(k + 1, &x.data().column(j));
    }
    let norms: Vec<f64> = z.column_iter().map(|c| c.norm()).collect();
    let qr = z.clone().qr();
    let r = qr.r();
    for i in 0..r.ncols() {
        if !(r[(i, i)].abs() > 1e-9 * norms[i].max(f64::MIN_POSITIVE)) {
            return None;
        }
    }
    let coef = r.solve_upper_triangular(&(qr.q().transpose() * y))?;
    let rss = (y - &z * &coef).norm_squared();
    Some(Ols { coef, rss })
}

pub fn stepwise_ols(x: &DesignMatrix, y: &[f64], criterion: Criterion) -> Result<StepwiseResult> {
    let n = x.nrows();
    if n <= 2 {
        return Err(Error::InsufficientData(format!("stepwise OLS needs n > 2, got {n}")));
    }
    if y.len() != n {
        return Err(Error::InvalidParameter(format!("{} responses for {n} rows", y.len())));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("response".into()));
    }
    let yv = DVector::from_column_slice(y);
    let ym = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - ym).powi(2)).sum();
    if !(tss > 1e-24 * y.iter().map(|v| v * v).sum::<f64>()) {
        return Err(Error::Degenerate("constant response".into()));
    }
    let base = ols(x, &yv, &[]).expect("intercept column is never collinear");
    let score_of = |fit: &Ols, p: usize| {
        // an exact fit has RSS 0; keep the score finite and minimal
        criterion.score(fit.rss.max(f64::MIN_POSITIVE), n, p)
    };
    let intercept_only_score = score_of(&base, 0);

    let mut current: Vec<usize> = Vec::new();
    let mut current_fit = base;
    let mut current_score = intercept_only_score;
    let mut moves = Vec::new();
    let mut warnings = Vec::new();
    let mut blocked: Vec<usize> = Vec::new();
    // a model can only be revisited if the score strictly improves each step, so this terminates
    loop {
        let mut best: Option<(f64, usize, bool, Vec<usize>, Ols)> = None;
        for j in 0..x.ncols() {
            let (trial, adding) = if let Some(pos) = current.iter().position(|&c| c == j) {
                let mut t = current.clone();
                t.remove(pos);
                (t, false)
            } else {
                if blocked.contains(&j) {
                    continue;
                }
                let mut t = current.clone();
                t.push(j);
                t.sort_unstable();
                (t, true)
            };
            let Some(fit) = ols(x, &yv, &trial) else {
                if adding {
                    blocked.push(j);
                    let msg = format!("`{}` is collinear with the current model; skipped", x.names()[j]);
                    log::warn!("{msg}");
                    warnings.push(msg);
                }
                continue;
            };
            let s = score_of(&fit, trial.len());
            if s < current_score && best.as_ref().is_none_or(|b| s < b.0) {
                best = Some((s, j, adding, trial, fit));
            }
        }
        let Some((s, j, adding, trial, fit)) = best else {
            break;
        };
        let name = x.names()[j].clone();
        moves.push(if adding { Move::Add(name) } else { Move::Drop(name) });
        if !adding {
            // a dropped column may admit previously collinear candidates again
            blocked.clear();
        }
        current = trial;
        current_fit = fit;
        current_score = s;
    }

    let mut coefficients = IndexMap::new();
    coefficients.insert(INTERCEPT.to_string(), current_fit.coef[0]);
    for (k, &j) in current.iter().enumerate() {
        coefficients.insert(x.names()[j].clone(), current_fit.coef[k + 1]);
    }
    Ok(StepwiseResult {
        selected: current.iter().map(|&j| x.names()[j].clone()).collect(),
        coefficients,
        criterion,
        score: current_score,
        intercept_only_score,
        rss: current_fit.rss,
        r_squared: 1.0 - current_fit.rss / tss,
        n,
        moves,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn design(rng: &mut ChaCha8Rng, n: usize, k: usize) -> DesignMatrix {
        let data = DMatrix::from_fn(n, k, |_, _| rng.sample::<f64, _>(StandardNormal));
        DesignMatrix::new((1..=k).map(|j| format!("x{j}")).collect(), data).unwrap()
    }

    #[test]
    fn recovers_single_signal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = design(&mut rng, 60, 8);
        let y: Vec<f64> = (0..60)
            .map(|i| 2.0 * x.data()[(i, 2)] + 0.05 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        for c in [Criterion::Aic, Criterion::Bic] {
            let r = stepwise_ols(&x, &y, c).unwrap();
            assert!(r.selected.contains(&"x3".to_string()));
            assert!((r.coefficients["x3"] - 2.0).abs() < 0.05);
            assert!(r.score <= r.intercept_only_score);
        }
        let r = stepwise_ols(&x, &y, Criterion::Bic).unwrap();
        assert_eq!(r.selected, vec!["x3"]);
    }

    #[test]
    fn duplicate_column_enters_once() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let base = design(&mut rng, 50, 3);
        let mut data = DMatrix::zeros(50, 4);
        data.columns_mut(0, 3).copy_from(base.data());
        data.set_column(3, &base.data().column(0));
        let x = DesignMatrix::new(vec!["x1".into(), "x2".into(), "x3".into(), "x1b".into()], data).unwrap();
        let y: Vec<f64> = (0..50)
            .map(|i| 1.5 * x.data()[(i, 0)] + 0.3 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let r = stepwise_ols(&x, &y, Criterion::Aic).unwrap();
        let n_pair = r.selected.iter().filter(|s| *s == "x1" || *s == "x1b").count();
        assert_eq!(n_pair, 1);
        assert!(!r.warnings.is_empty());
    }

    #[test]
    fn constant_response_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = design(&mut rng, 10, 2);
        assert!(matches!(stepwise_ols(&x, &[1.0; 10], Criterion::Aic), Err(Error::Degenerate(_))));
    }
}
