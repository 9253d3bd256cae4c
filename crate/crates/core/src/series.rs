//! Date-indexed series and the panel type that aligns them.
//!
//! Missing observations are `None`, never a sentinel number. All transforms
//! here propagate missing values and never impute.

use std::collections::BTreeSet;

use chrono::NaiveDate;
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

/// A named daily series with strictly increasing dates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailySeries {
    name: String,
    dates: Vec<NaiveDate>,
    values: Vec<Option<f64>>,
}

impl DailySeries {
    pub fn new(
        name: impl Into<String>,
        dates: Vec<NaiveDate>,
        values: Vec<Option<f64>>,
    ) -> Result<Self> {
        let name = name.into();
        if dates.len() != values.len() {
            return Err(Error::InvalidParameter(format!(
                "series `{name}`: {} dates but {} values",
                dates.len(),
                values.len()
            )));
        }
        for w in dates.windows(2) {
            if w[1] == w[0] {
                return Err(Error::DuplicateDate(w[1]));
            }
            if w[1] < w[0] {
                return Err(Error::UnorderedDates(w[1]));
            }
        }
        if let Some(v) = values.iter().flatten().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("series `{name}` contains {v}")));
        }
        Ok(Self { name, dates, values })
    }

    /// Consecutive calendar days starting at `start`, no missing values.
    pub fn from_values(name: impl Into<String>, start: NaiveDate, values: &[f64]) -> Result<Self> {
        let dates = consecutive_days(start, values.len());
        Self::new(name, dates, values.iter().map(|v| Some(*v)).collect())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// `None` if the date is not indexed; `Some(None)` if indexed but missing.
    pub fn get(&self, date: NaiveDate) -> Option<Option<f64>> {
        self.dates
            .binary_search(&date)
            .ok()
            .map(|i| self.values[i])
    }

    /// Non-missing `(date, value)` pairs in date order.
    pub fn present(&self) -> impl Iterator<Item = (NaiveDate, f64)> + '_ {
        self.dates
            .iter()
            .zip(&self.values)
            .filter_map(|(d, v)| v.map(|v| (*d, v)))
    }

    pub fn present_values(&self) -> Vec<f64> {
        self.values.iter().flatten().copied().collect()
    }

    pub fn count_present(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Applies `f` to every non-missing value.
    pub fn map_present(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            name: self.name.clone(),
            dates: self.dates.clone(),
            values: self.values.iter().map(|v| v.map(&f)).collect(),
        }
    }

    fn with_values(&self, values: Vec<Option<f64>>) -> Self {
        debug_assert_eq!(values.len(), self.dates.len());
        Self {
            name: self.name.clone(),
            dates: self.dates.clone(),
            values,
        }
    }

    /// Restricts the series to dates in `[start, end]`.
    pub fn between(&self, start: NaiveDate, end: NaiveDate) -> Self {
        let lo = self.dates.partition_point(|d| *d < start);
        let hi = self.dates.partition_point(|d| *d <= end);
        Self {
            name: self.name.clone(),
            dates: self.dates[lo..hi].to_vec(),
            values: self.values[lo..hi].to_vec(),
        }
    }
}

pub fn consecutive_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    start.iter_days().take(n).collect()
}

/// Date-alignment rule for [`align_panel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignPolicy {
    Intersection,
    Union,
}

/// Named columns re-indexed to one shared, strictly increasing date axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    dates: Vec<NaiveDate>,
    columns: IndexMap<String, Vec<Option<f64>>>,
}

impl Panel {
    pub fn new(dates: Vec<NaiveDate>) -> Result<Self> {
        for w in dates.windows(2) {
            if w[1] == w[0] {
                return Err(Error::DuplicateDate(w[1]));
            }
            if w[1] < w[0] {
                return Err(Error::UnorderedDates(w[1]));
            }
        }
        Ok(Self {
            dates,
            columns: IndexMap::new(),
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.keys().map(String::as_str)
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.columns.contains_key(name)
    }

    pub fn position(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }

    pub fn values(&self, name: &str) -> Result<&[Option<f64>]> {
        self.columns
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn column(&self, name: &str) -> Result<DailySeries> {
        let values = self.values(name)?.to_vec();
        Ok(DailySeries {
            name: name.to_string(),
            dates: self.dates.clone(),
            values,
        })
    }

    pub fn columns(&self) -> impl Iterator<Item = DailySeries> + '_ {
        self.columns.iter().map(|(name, values)| DailySeries {
            name: name.clone(),
            dates: self.dates.clone(),
            values: values.clone(),
        })
    }

    /// Adds a column, re-indexing it onto the panel's dates. Dates the series
    /// lacks become missing; dates outside the panel are dropped.
    pub fn insert(&mut self, series: &DailySeries) -> Result<()> {
        if self.columns.contains_key(series.name()) {
            return Err(Error::DuplicateName(series.name().to_string()));
        }
        let values = self.reindex(series);
        self.columns.insert(series.name().to_string(), values);
        Ok(())
    }

    /// Replaces an existing column (or inserts a new one) keeping column order.
    pub fn upsert(&mut self, series: &DailySeries) {
        let values = self.reindex(series);
        self.columns.insert(series.name().to_string(), values);
    }

    fn reindex(&self, series: &DailySeries) -> Vec<Option<f64>> {
        self.dates
            .iter()
            .map(|d| series.get(*d).flatten())
            .collect()
    }

    /// Sub-panel over the dates in `[start, end]`.
    pub fn between(&self, start: NaiveDate, end: NaiveDate) -> Panel {
        let lo = self.dates.partition_point(|d| *d < start);
        let hi = self.dates.partition_point(|d| *d <= end);
        Panel {
            dates: self.dates[lo..hi].to_vec(),
            columns: self
                .columns
                .iter()
                .map(|(k, v)| (k.clone(), v[lo..hi].to_vec()))
                .collect(),
        }
    }

    /// Keeps only the named columns, in the given order.
    pub fn select(&self, names: &[&str]) -> Result<Panel> {
        let mut columns = IndexMap::new();
        for name in names {
            let v = self.values(name)?.to_vec();
            if columns.insert(name.to_string(), v).is_some() {
                return Err(Error::DuplicateName(name.to_string()));
            }
        }
        Ok(Panel {
            dates: self.dates.clone(),
            columns,
        })
    }
}

/// Aligns several series onto one date axis.
pub fn align_panel(series: &[DailySeries], policy: AlignPolicy) -> Result<Panel> {
    if series.is_empty() {
        return Err(Error::EmptyInput("align_panel needs at least one series"));
    }
    let mut seen = BTreeSet::new();
    for s in series {
        if !seen.insert(s.name()) {
            return Err(Error::DuplicateName(s.name().to_string()));
        }
    }
    let dates: Vec<NaiveDate> = match policy {
        AlignPolicy::Union => {
            let all: BTreeSet<NaiveDate> = series.iter().flat_map(|s| s.dates().iter().copied()).collect();
            all.into_iter().collect()
        }
        AlignPolicy::Intersection => {
            let mut common: BTreeSet<NaiveDate> = series[0].dates().iter().copied().collect();
            for s in &series[1..] {
                let other: BTreeSet<NaiveDate> = s.dates().iter().copied().collect();
                common = common.intersection(&other).copied().collect();
            }
            if common.is_empty() {
                return Err(Error::EmptyOverlap);
            }
            common.into_iter().collect()
        }
    };
    let mut panel = Panel::new(dates)?;
    for s in series {
        panel.insert(s)?;
    }
    Ok(panel)
}

/// Trailing moving average over the last `window` observations (by position).
///
/// The first `window - 1` outputs are missing, and any missing input inside a
/// window makes that output missing.
pub fn moving_average(s: &DailySeries, window: usize) -> Result<DailySeries> {
    if window == 0 {
        return Err(Error::InvalidParameter("moving-average window must be >= 1".into()));
    }
    let v = s.values();
    let mut out = vec![None; v.len()];
    // count of missing entries inside the current window
    let mut missing = 0usize;
    for i in 0..v.len() {
        missing += usize::from(v[i].is_none());
        if i >= window {
            missing -= usize::from(v[i - window].is_none());
        }
        if i + 1 >= window && missing == 0 {
            // summed afresh per window so outputs carry no running-sum drift
            let total: f64 = v[i + 1 - window..=i].iter().flatten().sum();
            out[i] = Some(total / window as f64);
        }
    }
    Ok(s.with_values(out))
}

/// Z-scores the non-missing values (sample standard deviation, ddof = 1).
pub fn standardize(s: &DailySeries) -> Result<DailySeries> {
    let present = s.present_values();
    let (mean, sd) = moments(&present).ok_or_else(|| {
        Error::Degenerate(format!("series `{}` has zero variance or fewer than 2 values", s.name()))
    })?;
    Ok(s.map_present(|x| (x - mean) / sd))
}

/// Sample mean and standard deviation, `None` when fewer than two values or
/// the spread is zero relative to the data's magnitude.
pub(crate) fn moments(values: &[f64]) -> Option<(f64, f64)> {
    if values.len() < 2 {
        return None;
    }
    let mean = stats::mean(values);
    let sd = stats::sample_sd(values);
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(sd > 1e-13 * scale.max(f64::MIN_POSITIVE)) {
        return None;
    }
    Some((mean, sd))
}

/// Shifts values `k` positions later: output at position `i` is input at `i - k`.
pub fn lag(s: &DailySeries, k: usize) -> DailySeries {
    let v = s.values();
    let out = (0..v.len())
        .map(|i| if i >= k { v[i - k] } else { None })
        .collect();
    s.with_values(out)
}

/// Replaces negative values with zero.
pub fn clamp_negative(s: &DailySeries) -> DailySeries {
    s.map_present(|x| x.max(0.0))
}

/// Carries the last observed value forward over missing slots. Leading
/// missing values stay missing.
pub fn forward_fill(s: &DailySeries) -> DailySeries {
    let mut last = None;
    let out = s
        .values()
        .iter()
        .map(|v| {
            if v.is_some() {
                last = *v;
            }
            last
        })
        .collect();
    s.with_values(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 1, day).unwrap()
    }

    fn series(name: &str, days: std::ops::RangeInclusive<u32>) -> DailySeries {
        let dates: Vec<_> = days.clone().map(d).collect();
        let values = days.map(|x| Some(x as f64)).collect();
        DailySeries::new(name, dates, values).unwrap()
    }

    #[test]
    fn rejects_unordered_and_duplicate_dates() {
        let e = DailySeries::new("x", vec![d(2), d(1)], vec![Some(1.0), Some(2.0)]).unwrap_err();
        assert_eq!(e, Error::UnorderedDates(d(1)));
        let e = DailySeries::new("x", vec![d(2), d(2)], vec![Some(1.0), Some(2.0)]).unwrap_err();
        assert_eq!(e, Error::DuplicateDate(d(2)));
        assert!(DailySeries::new("x", vec![d(1)], vec![Some(f64::NAN)]).is_err());
    }

    #[test]
    fn intersection_and_union() {
        let a = series("a", 1..=5);
        let b = series("b", 3..=8);
        let p = align_panel(&[a.clone(), b.clone()], AlignPolicy::Intersection).unwrap();
        assert_eq!(p.dates(), &[d(3), d(4), d(5)]);
        assert_eq!(p.values("a").unwrap(), &[Some(3.0), Some(4.0), Some(5.0)]);

        let p = align_panel(&[a, b], AlignPolicy::Union).unwrap();
        assert_eq!(p.n_dates(), 8);
        assert_eq!(p.values("a").unwrap()[6], None);
        assert_eq!(p.values("b").unwrap()[0], None);
        assert_eq!(p.values("b").unwrap()[7], Some(8.0));
    }

    #[test]
    fn single_series_panel_is_identity() {
        let a = series("a", 1..=5);
        let p = align_panel(std::slice::from_ref(&a), AlignPolicy::Intersection).unwrap();
        assert_eq!(p.column("a").unwrap(), a);
    }

    #[test]
    fn align_errors() {
        let a = series("a", 1..=3);
        let b = series("b", 5..=8);
        assert_eq!(
            align_panel(&[a.clone(), b], AlignPolicy::Intersection).unwrap_err(),
            Error::EmptyOverlap
        );
        assert_eq!(
            align_panel(&[a.clone(), a], AlignPolicy::Union).unwrap_err(),
            Error::DuplicateName("a".into())
        );
        assert!(align_panel(&[], AlignPolicy::Union).is_err());
    }

    #[test]
    fn moving_average_examples() {
        let c = DailySeries::from_values("c", d(1), &[2.5; 20]).unwrap();
        let ma = moving_average(&c, 7).unwrap();
        assert!(ma.values()[..6].iter().all(Option::is_none));
        assert!(ma.values()[6..].iter().all(|v| *v == Some(2.5)));

        let s = series("s", 1..=7);
        let ma = moving_average(&s, 7).unwrap();
        assert_eq!(ma.values()[6], Some(4.0));
        assert!(moving_average(&s, 0).is_err());
    }

    #[test]
    fn moving_average_propagates_missing() {
        let mut v: Vec<Option<f64>> = (0..10).map(|i| Some(i as f64)).collect();
        v[4] = None;
        let s = DailySeries::new("s", consecutive_days(d(1), 10), v).unwrap();
        let ma = moving_average(&s, 3).unwrap();
        assert_eq!(ma.values()[3], Some(2.0));
        assert_eq!(ma.values()[4], None);
        assert_eq!(ma.values()[6], None);
        assert_eq!(ma.values()[7], Some(6.0));
    }

    #[test]
    fn standardize_examples() {
        let s = DailySeries::from_values("s", d(1), &[1.0, 2.0, 3.0]).unwrap();
        let z = standardize(&s).unwrap();
        assert_eq!(z.values(), &[Some(-1.0), Some(0.0), Some(1.0)]);
        let again = standardize(&z).unwrap();
        for (a, b) in z.present_values().iter().zip(again.present_values()) {
            assert!((a - b).abs() < 1e-12);
        }
        let flat = DailySeries::from_values("f", d(1), &[4.0; 5]).unwrap();
        assert!(matches!(standardize(&flat), Err(Error::Degenerate(_))));
        let one = DailySeries::from_values("o", d(1), &[4.0]).unwrap();
        assert!(standardize(&one).is_err());
    }

    #[test]
    fn lag_examples() {
        let s = DailySeries::from_values("s", d(1), &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(lag(&s, 0), s);
        assert_eq!(lag(&s, 1).values(), &[None, Some(1.0), Some(2.0)]);
        assert_eq!(lag(&lag(&s, 1), 1), lag(&s, 2));
        assert_eq!(lag(&s, 5).count_present(), 0);
    }

    #[test]
    fn clamp_and_fill() {
        let s = DailySeries::new(
            "s",
            consecutive_days(d(1), 4),
            vec![None, Some(-5.0), None, Some(3.0)],
        )
        .unwrap();
        assert_eq!(clamp_negative(&s).values(), &[None, Some(0.0), None, Some(3.0)]);
        assert_eq!(forward_fill(&s).values(), &[None, Some(-5.0), Some(-5.0), Some(3.0)]);
    }

    #[test]
    fn panel_between_and_select() {
        let p = align_panel(&[series("a", 1..=9), series("b", 1..=9)], AlignPolicy::Union).unwrap();
        let sub = p.between(d(3), d(5));
        assert_eq!(sub.n_dates(), 3);
        let only_b = p.select(&["b"]).unwrap();
        assert_eq!(only_b.names().collect::<Vec<_>>(), vec!["b"]);
        assert!(p.select(&["zz"]).is_err());
    }
}
