//! Month-by-month Spearman screen of a target against every other column.

use chrono::Datelike;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::Panel;
use crate::stats::{correlation_p_value, mid_ranks, pearson};

pub const FULL_PERIOD: &str = "full";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskReason {
    NotSignificant,
    TooFewObservations,
    /// One side is constant, so the rank correlation is undefined.
    Undefined,
}

impl MaskReason {
    pub fn as_str(self) -> &'static str {
        match self {
            MaskReason::NotSignificant => "not_significant",
            MaskReason::TooFewObservations => "too_few_observations",
            MaskReason::Undefined => "undefined",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationCell {
    pub period: String,
    pub variable: String,
    pub rho: Option<f64>,
    pub p_value: Option<f64>,
    pub n: usize,
    pub mask: Option<MaskReason>,
}

impl CorrelationCell {
    /// The coefficient when it is reported (significant and defined).
    pub fn shown(&self) -> Option<f64> {
        if self.mask.is_none() {
            self.rho
        } else {
            None
        }
    }
}

/// Periods (months in `YYYY-MM` form, then `full`) by variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTable {
    pub periods: Vec<String>,
    pub variables: Vec<String>,
    /// Row-major: `cells[period][variable]`.
    pub cells: Vec<Vec<CorrelationCell>>,
}

impl CorrelationTable {
    pub fn cell(&self, period: &str, variable: &str) -> Option<&CorrelationCell> {
        let p = self.periods.iter().position(|x| x == period)?;
        let v = self.variables.iter().position(|x| x == variable)?;
        Some(&self.cells[p][v])
    }
}

fn cell(period: &str, variable: &str, pairs: &[(f64, f64)], significance: f64) -> CorrelationCell {
    let mut out = CorrelationCell {
        period: period.to_string(),
        variable: variable.to_string(),
        rho: None,
        p_value: None,
        n: pairs.len(),
        mask: None,
    };
    if pairs.len() < 3 {
        out.mask = Some(MaskReason::TooFewObservations);
        return out;
    }
    let (a, b): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    match pearson(&mid_ranks(&a), &mid_ranks(&b)) {
        None => out.mask = Some(MaskReason::Undefined),
        Some(rho) => {
            let p = correlation_p_value(rho, pairs.len());
            out.rho = Some(rho);
            out.p_value = Some(p);
            if p >= significance {
                out.mask = Some(MaskReason::NotSignificant);
            }
        }
    }
    out
}

/// Spearman ρ of `target` against each other column within each calendar
/// month and over the whole panel; cells with `p ≥ significance` are masked.
pub fn monthly_correlations(panel: &Panel, target: &str, significance: f64) -> Result<CorrelationTable> {
    let y = panel.values(target)?;
    if panel.n_dates() == 0 {
        return Err(Error::EmptyInput("panel"));
    }
    let variables: Vec<String> = panel.names().filter(|n| *n != target).map(String::from).collect();
    let month_of = |i: usize| {
        let d = panel.dates()[i];
        format!("{:04}-{:02}", d.year(), d.month())
    };
    let mut periods: Vec<String> = Vec::new();
    for i in 0..panel.n_dates() {
        let m = month_of(i);
        if periods.last() != Some(&m) {
            periods.push(m);
        }
    }
    let mut cells: Vec<Vec<CorrelationCell>> = periods.iter().map(|_| Vec::new()).collect();
    cells.push(Vec::new());
    for v in &variables {
        let x = panel.values(v)?;
        let mut by_month: Vec<Vec<(f64, f64)>> = vec![Vec::new(); periods.len()];
        let mut all = Vec::new();
        let mut p = 0;
        for i in 0..panel.n_dates() {
            if month_of(i) != periods[p] {
                p += 1;
            }
            if let (Some(a), Some(b)) = (y[i], x[i]) {
                by_month[p].push((a, b));
                all.push((a, b));
            }
        }
        for (k, pairs) in by_month.iter().enumerate() {
            cells[k].push(cell(&periods[k], v, pairs, significance));
        }
        cells[periods.len()].push(cell(FULL_PERIOD, v, &all, significance));
    }
    periods.push(FULL_PERIOD.to_string());
    Ok(CorrelationTable {
        periods,
        variables,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::{consecutive_days, DailySeries};
    use chrono::NaiveDate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn panel(cols: &[(&str, Vec<Option<f64>>)], start: NaiveDate) -> Panel {
        let n = cols[0].1.len();
        let mut p = Panel::new(consecutive_days(start, n)).unwrap();
        for (name, v) in cols {
            p.insert(&DailySeries::new(*name, p.dates().to_vec(), v.clone()).unwrap()).unwrap();
        }
        p
    }

    #[test]
    fn monotone_constant_and_sparse_cells() {
        let start = NaiveDate::from_ymd_opt(2020, 3, 1).unwrap();
        let n = 45;
        let y: Vec<Option<f64>> = (0..n).map(|i| Some(((i * 7) % 13) as f64 + i as f64 * 0.01)).collect();
        let mono: Vec<Option<f64>> = y.iter().map(|v| v.map(|v| v.exp())).collect();
        let flat = vec![Some(2.0); n];
        // only two values present in April
        let sparse: Vec<Option<f64>> = (0..n).map(|i| if !(31..=42).contains(&i) { Some(i as f64) } else { None }).collect();
        let p = panel(&[("y", y), ("mono", mono), ("flat", flat), ("sparse", sparse)], start);
        let t = monthly_correlations(&p, "y", 0.05).unwrap();
        assert_eq!(t.periods, vec!["2020-03", "2020-04", "full"]);
        assert_eq!(t.cell("2020-03", "mono").unwrap().shown(), Some(1.0));
        assert_eq!(t.cell("full", "flat").unwrap().mask, Some(MaskReason::Undefined));
        let s = t.cell("2020-04", "sparse").unwrap();
        assert_eq!((s.n, s.mask), (2, Some(MaskReason::TooFewObservations)));
    }

    #[test]
    fn independent_noise_is_mostly_masked() {
        let start = NaiveDate::from_ymd_opt(2021, 6, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let reps = 400;
        let mut masked = 0;
        for _ in 0..reps {
            let a: Vec<Option<f64>> = (0..30).map(|_| Some(rng.random())).collect();
            let b: Vec<Option<f64>> = (0..30).map(|_| Some(rng.random())).collect();
            let t = monthly_correlations(&panel(&[("y", a), ("x", b)], start), "y", 0.05).unwrap();
            if t.cell("2021-06", "x").unwrap().mask.is_some() {
                masked += 1;
            }
        }
        // binomial(400, 0.95): ± 3 sd ≈ ±0.033
        let rate = masked as f64 / reps as f64;
        assert!((rate - 0.95).abs() < 0.033, "{rate}");
    }
}
