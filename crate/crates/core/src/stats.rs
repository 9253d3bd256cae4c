//! Small descriptive statistics and rank correlation.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};
use crate::series::DailySeries;

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation with ddof = 1. `NaN` for fewer than 2 values.
pub fn sample_sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return f64::NAN;
    }
    let m = mean(v);
    let ss: f64 = v.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (v.len() - 1) as f64).sqrt()
}

/// Mid-ranks (1-based); ties share the average of the ranks they span.
pub fn mid_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation; `None` when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    debug_assert_eq!(x.len(), y.len());
    let mx = mean(x);
    let my = mean(y);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Result of a rank-correlation test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub rho: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Two-sided p-value of a correlation coefficient via the t approximation
/// with `n - 2` degrees of freedom.
pub fn correlation_p_value(rho: f64, n: usize) -> f64 {
    if n < 3 {
        return 1.0;
    }
    let df = (n - 2) as f64;
    let denom = 1.0 - rho * rho;
    if denom <= 0.0 {
        return 0.0;
    }
    let t = rho * (df / denom).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0)
}

/// Spearman rank correlation over the dates where both series are present.
pub fn spearman(x: &DailySeries, y: &DailySeries) -> Result<CorrelationResult> {
    let (a, b) = paired(x, y);
    spearman_values(&a, &b)
}

pub fn spearman_values(x: &[f64], y: &[f64]) -> Result<CorrelationResult> {
    let n = x.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "spearman needs >= 3 paired observations, got {n}"
        )));
    }
    let rho = pearson(&mid_ranks(x), &mid_ranks(y))
        .ok_or_else(|| Error::Degenerate("all values tied: rank correlation undefined".into()))?;
    Ok(CorrelationResult {
        rho,
        p_value: correlation_p_value(rho, n),
        n,
    })
}

/// Values of the two series on the dates where both are present.
pub fn paired(x: &DailySeries, y: &DailySeries) -> (Vec<f64>, Vec<f64>) {
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (date, xv) in x.present() {
        if let Some(Some(yv)) = y.get(date) {
            a.push(xv);
            b.push(yv);
        }
    }
    (a, b)
}

/// Two-sided normal p-value for a z statistic.
pub fn normal_two_sided_p(z: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).expect("unit normal");
    (2.0 * n.sf(z.abs())).clamp(0.0, 1.0)
}

/// Significance stars at the 0.1 / 0.05 / 0.01 levels.
pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}
