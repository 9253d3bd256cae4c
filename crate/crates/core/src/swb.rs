//! Composite subjective well-being index from daily sentiment distributions.
//!
//! Each of the eight components is scored per day as
//! `positive / (positive + negative)`; the composite is their unweighted mean.
//! The core formulas live on `[0, 1]`; [`swb_series`] reports on `[0, 100]`.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::DailySeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    Emo,
    Sat,
    Vit,
    Res,
    Fun,
    Tru,
    Rel,
    Wor,
}

impl Component {
    pub const ALL: [Component; 8] = [
        Component::Emo,
        Component::Sat,
        Component::Vit,
        Component::Res,
        Component::Fun,
        Component::Tru,
        Component::Rel,
        Component::Wor,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Component::Emo => "emo",
            Component::Sat => "sat",
            Component::Vit => "vit",
            Component::Res => "res",
            Component::Fun => "fun",
            Component::Tru => "tru",
            Component::Rel => "rel",
            Component::Wor => "wor",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Component {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Component::ALL
            .into_iter()
            .find(|c| c.as_str() == s.trim())
            .ok_or_else(|| Error::InvalidParameter(format!("unknown SWB component `{s}`")))
    }
}

/// Estimated category shares of one component on one day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentDistribution {
    positive: f64,
    neutral: f64,
    negative: f64,
    offtopic: f64,
}

impl ComponentDistribution {
    pub const SUM_TOLERANCE: f64 = 1e-9;

    pub fn new(positive: f64, neutral: f64, negative: f64, offtopic: f64) -> Result<Self> {
        let parts = [positive, neutral, negative, offtopic];
        if parts.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidParameter(format!(
                "category proportions must lie in [0, 1], got {parts:?}"
            )));
        }
        let total: f64 = parts.iter().sum();
        if (total - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "category proportions sum to {total}, expected 1"
            )));
        }
        Ok(Self {
            positive,
            neutral,
            negative,
            offtopic,
        })
    }

    pub fn positive(&self) -> f64 {
        self.positive
    }
    pub fn neutral(&self) -> f64 {
        self.neutral
    }
    pub fn negative(&self) -> f64 {
        self.negative
    }
    pub fn offtopic(&self) -> f64 {
        self.offtopic
    }
}

/// All eight component distributions for one day.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyComponents {
    pub date: NaiveDate,
    components: [ComponentDistribution; 8],
}

impl DailyComponents {
    /// `components` is indexed in [`Component::ALL`] order.
    pub fn new(date: NaiveDate, components: [ComponentDistribution; 8]) -> Self {
        Self { date, components }
    }

    pub fn from_map(date: NaiveDate, map: &BTreeMap<Component, ComponentDistribution>) -> Result<Self> {
        let mut out = Vec::with_capacity(8);
        for c in Component::ALL {
            out.push(*map.get(&c).ok_or_else(|| {
                Error::InvalidParameter(format!("{date}: component `{c}` missing"))
            })?);
        }
        if map.len() != 8 {
            return Err(Error::InvalidParameter(format!("{date}: expected 8 components")));
        }
        Ok(Self::new(date, out.try_into().expect("eight components")))
    }

    pub fn get(&self, c: Component) -> &ComponentDistribution {
        &self.components[c.index()]
    }
}

/// `positive / (positive + negative)`, missing when both are zero.
pub fn component_index(d: &ComponentDistribution) -> Option<f64> {
    let denom = d.positive + d.negative;
    if denom > 0.0 {
        Some(d.positive / denom)
    } else {
        None
    }
}

/// Unweighted mean of the eight component indices; missing if any is.
pub fn swb_daily(dc: &DailyComponents) -> Option<f64> {
    let mut total = 0.0;
    for c in Component::ALL {
        total += component_index(dc.get(c))?;
    }
    Some(total / 8.0)
}

/// Composite index per day on the `[0, 100]` presentation scale.
pub fn swb_series(name: &str, days: &[DailyComponents]) -> Result<DailySeries> {
    let mut sorted: Vec<&DailyComponents> = days.iter().collect();
    sorted.sort_by_key(|d| d.date);
    if let Some(w) = sorted.windows(2).find(|w| w[0].date == w[1].date) {
        return Err(Error::DuplicateDate(w[0].date));
    }
    let dates = sorted.iter().map(|d| d.date).collect();
    let values = sorted.iter().map(|d| swb_daily(d).map(|v| 100.0 * v)).collect();
    DailySeries::new(name, dates, values)
}

/// Calendar-year means of the non-missing values.
pub fn yearly_means(s: &DailySeries) -> BTreeMap<i32, f64> {
    let mut acc: BTreeMap<i32, (f64, usize)> = BTreeMap::new();
    for (d, v) in s.present() {
        let e = acc.entry(d.year()).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
    }
    acc.into_iter().map(|(y, (s, n))| (y, s / n as f64)).collect()
}

/// Reads the long-format component file: columns
/// `date,component,positive,neutral,negative,offtopic`, one row per day and
/// component.
pub fn read_components<R: Read>(reader: R) -> Result<Vec<DailyComponents>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    };
    let (ci_date, ci_comp) = (col("date")?, col("component")?);
    let cols = [col("positive")?, col("neutral")?, col("negative")?, col("offtopic")?];

    let mut by_day: BTreeMap<NaiveDate, BTreeMap<Component, ComponentDistribution>> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let loc = || format!("row {}", i + 2);
        let field = |k: usize| rec.get(k).unwrap_or("").trim();
        let date = NaiveDate::parse_from_str(field(ci_date), "%Y-%m-%d").map_err(|e| Error::Parse {
            location: loc(),
            message: e.to_string(),
        })?;
        let comp: Component = field(ci_comp).parse()?;
        let mut v = [0.0; 4];
        for (slot, &k) in v.iter_mut().zip(&cols) {
            *slot = field(k).parse().map_err(|e| Error::Parse {
                location: loc(),
                message: format!("`{}`: {e}", field(k)),
            })?;
        }
        let dist = ComponentDistribution::new(v[0], v[1], v[2], v[3]).map_err(|e| Error::Parse {
            location: loc(),
            message: e.to_string(),
        })?;
        if by_day.entry(date).or_default().insert(comp, dist).is_some() {
            return Err(Error::Parse {
                location: loc(),
                message: format!("component `{comp}` repeated for {date}"),
            });
        }
    }
    by_day
        .iter()
        .map(|(d, m)| DailyComponents::from_map(*d, m))
        .collect()
}

pub fn load_components(path: impl AsRef<Path>) -> Result<Vec<DailyComponents>> {
    let file = std::fs::File::open(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    read_components(file)
}

/// Writes components in the long format read by [`read_components`].
pub fn write_components<W: std::io::Write>(days: &[DailyComponents], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["date", "component", "positive", "neutral", "negative", "offtopic"])?;
    for day in days {
        for c in Component::ALL {
            let d = day.get(c);
            w.write_record([
                day.date.to_string(),
                c.to_string(),
                d.positive.to_string(),
                d.neutral.to_string(),
                d.negative.to_string(),
                d.offtopic.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
