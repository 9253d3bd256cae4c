//! File-based panel loading and the preprocessing rules applied per column.
//!
//! Input tables are comma-delimited with a header row, an ISO-8601 `date`
//! column and one column per variable. Empty cells and `NA` are missing;
//! any other cell that does not parse as a number also becomes missing and is
//! counted in [`LoadReport`].

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{self, DailySeries, Panel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Target,
    Covariate,
    Dummy,
}

/// Per-column preprocessing step, applied in declared order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    ClampNegative,
    Ma7,
    Standardize,
    /// Opt-in carry-forward over missing days (e.g. non-trading days).
    #[serde(rename = "ffill")]
    ForwardFill,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub role: Role,
    #[serde(default)]
    pub transforms: Vec<Transform>,
}

impl ColumnSpec {
    pub fn new(name: impl Into<String>, role: Role, transforms: Vec<Transform>) -> Self {
        Self {
            name: name.into(),
            role,
            transforms,
        }
    }
}

/// Inclusive calendar range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawRange")]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

#[derive(Deserialize)]
struct RawRange {
    start: NaiveDate,
    end: NaiveDate,
}

impl TryFrom<RawRange> for DateRange {
    type Error = Error;
    fn try_from(r: RawRange) -> Result<Self> {
        DateRange::new(r.start, r.end)
    }
}

impl DateRange {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self> {
        if start > end {
            return Err(Error::InvalidParameter(format!(
                "date range starts {start} after it ends {end}"
            )));
        }
        Ok(Self { start, end })
    }

    pub fn contains(&self, d: NaiveDate) -> bool {
        self.start <= d && d <= self.end
    }
}

/// A 0/1 indicator built from date ranges instead of read from file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DummySpec {
    pub name: String,
    pub ranges: Vec<DateRange>,
    #[serde(default)]
    pub transforms: Vec<Transform>,
}

/// Panel-spec config: which file columns to load, how to transform them,
/// which dummies to construct and an optional date restriction.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PanelSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<NaiveDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<NaiveDate>,
    #[serde(default, rename = "column")]
    pub columns: Vec<ColumnSpec>,
    #[serde(default, rename = "dummy")]
    pub dummies: Vec<DummySpec>,
}

impl PanelSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            location: "panel spec".into(),
            message: e.to_string(),
        })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_toml(&text)
    }

    pub fn target(&self) -> Option<&str> {
        self.columns
            .iter()
            .find(|c| c.role == Role::Target)
            .map(|c| c.name.as_str())
    }
}

/// Diagnostics gathered while loading.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LoadReport {
    pub rows: usize,
    pub unparseable_cells: usize,
    pub unparseable_by_column: BTreeMap<String, usize>,
}

/// Loads the spec'd columns of a delimited file into a panel over the file's
/// dates, applying each column's transforms in declared order.
pub fn load_panel(path: impl AsRef<Path>, specs: &[ColumnSpec]) -> Result<(Panel, LoadReport)> {
    let file = std::fs::File::open(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    read_panel(file, specs)
}

pub fn read_panel<R: Read>(reader: R, specs: &[ColumnSpec]) -> Result<(Panel, LoadReport)> {
    let table = RawTable::read(reader)?;
    let mut report = LoadReport {
        rows: table.dates.len(),
        ..Default::default()
    };
    let mut panel = Panel::new(table.dates.clone())?;
    for spec in specs {
        let col = table
            .header
            .iter()
            .position(|h| *h == spec.name)
            .ok_or_else(|| Error::UnknownColumn(spec.name.clone()))?;
        let mut bad = 0usize;
        let values: Vec<Option<f64>> = table
            .cells
            .iter()
            .map(|row| {
                let (v, ok) = parse_cell(&row[col]);
                bad += usize::from(!ok);
                v
            })
            .collect();
        if bad > 0 {
            log::warn!("column `{}`: {bad} unparseable cell(s) treated as missing", spec.name);
            report.unparseable_cells += bad;
            report.unparseable_by_column.insert(spec.name.clone(), bad);
        }
        let raw = DailySeries::new(spec.name.clone(), table.dates.clone(), values)?;
        if spec.role == Role::Dummy {
            check_dummy(&raw)?;
        }
        let transformed = apply_transforms(&raw, &spec.transforms)?;
        panel.insert(&transformed)?;
    }
    Ok((panel, report))
}

/// Loads every non-date column of a file without transforms, the first as
/// the target and the rest as covariates.
pub fn load_all(path: impl AsRef<Path>) -> Result<(Panel, LoadReport)> {
    let file = std::fs::File::open(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let specs: Vec<ColumnSpec> = rdr
        .headers()?
        .iter()
        .map(str::trim)
        .filter(|h| *h != "date")
        .enumerate()
        .map(|(i, h)| ColumnSpec::new(h, if i == 0 { Role::Target } else { Role::Covariate }, vec![]))
        .collect();
    load_panel(path, &specs)
}

/// Loads a file according to a full [`PanelSpec`], including constructed
/// dummies and the optional date restriction.
pub fn load_with_spec(path: impl AsRef<Path>, spec: &PanelSpec) -> Result<(Panel, LoadReport)> {
    let (panel, report) = load_panel(path, &spec.columns)?;
    finish_panel(panel, spec).map(|p| (p, report))
}

fn finish_panel(mut panel: Panel, spec: &PanelSpec) -> Result<Panel> {
    for dummy in &spec.dummies {
        let raw = build_dummy(&dummy.name, &dummy.ranges, panel.dates())?;
        let transformed = apply_transforms(&raw, &dummy.transforms)?;
        panel.insert(&transformed)?;
    }
    let start = spec.start.or_else(|| panel.dates().first().copied());
    let end = spec.end.or_else(|| panel.dates().last().copied());
    match (start, end) {
        (Some(s), Some(e)) => Ok(panel.between(s, e)),
        _ => Ok(panel),
    }
}

/// Indicator equal to 1 on dates inside any range and 0 elsewhere.
pub fn build_dummy(name: &str, ranges: &[DateRange], dates: &[NaiveDate]) -> Result<DailySeries> {
    let values = dates
        .iter()
        .map(|d| Some(if ranges.iter().any(|r| r.contains(*d)) { 1.0 } else { 0.0 }))
        .collect();
    DailySeries::new(name, dates.to_vec(), values)
}

pub fn apply_transforms(s: &DailySeries, transforms: &[Transform]) -> Result<DailySeries> {
    let mut out = s.clone();
    for t in transforms {
        out = match t {
            Transform::ClampNegative => series::clamp_negative(&out),
            Transform::Ma7 => series::moving_average(&out, 7)?,
            Transform::Standardize => series::standardize(&out)?,
            Transform::ForwardFill => series::forward_fill(&out),
        };
    }
    Ok(out)
}

fn check_dummy(s: &DailySeries) -> Result<()> {
    match s.present().find(|(_, v)| *v != 0.0 && *v != 1.0) {
        Some((d, v)) => Err(Error::InvalidParameter(format!(
            "dummy column `{}` has value {v} on {d}; expected 0 or 1",
            s.name()
        ))),
        None => Ok(()),
    }
}

/// Returns the parsed value and whether the cell was well formed.
fn parse_cell(cell: &str) -> (Option<f64>, bool) {
    let t = cell.trim();
    if t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan") {
        return (None, true);
    }
    match t.parse::<f64>() {
        Ok(v) if v.is_finite() => (Some(v), true),
        _ => (None, false),
    }
}

/// Date-sorted rows of a delimited table with a `date` column.
pub(crate) struct RawTable {
    pub header: Vec<String>,
    pub dates: Vec<NaiveDate>,
    pub cells: Vec<Vec<String>>,
}

impl RawTable {
    pub fn read<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let date_col = header
            .iter()
            .position(|h| h == "date")
            .ok_or_else(|| Error::UnknownColumn("date".into()))?;
        let mut rows: Vec<(NaiveDate, Vec<String>)> = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let raw = rec.get(date_col).unwrap_or("").trim();
            let date = NaiveDate::parse_from_str(raw, "%Y-%m-%d").map_err(|e| Error::Parse {
                location: format!("row {}", i + 2),
                message: format!("bad date `{raw}`: {e}"),
            })?;
            rows.push((date, rec.iter().map(str::to_string).collect()));
        }
        rows.sort_by_key(|(d, _)| *d);
        if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::DuplicateDate(w[0].0));
        }
        let (dates, cells) = rows.into_iter().unzip();
        Ok(Self {
            header,
            dates,
            cells,
        })
    }
}

/// Writes a panel as a delimited table (`date` first, then columns in order).
/// Missing values are written as empty cells.
pub fn write_panel<W: std::io::Write>(panel: &Panel, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let names: Vec<&str> = panel.names().collect();
    let mut header = vec!["date"];
    header.extend(&names);
    w.write_record(&header)?;
    let cols: Vec<&[Option<f64>]> = names.iter().map(|n| panel.values(n).unwrap()).collect();
    for (i, d) in panel.dates().iter().enumerate() {
        let mut rec = vec![d.to_string()];
        rec.extend(cols.iter().map(|c| c[i].map(|v| v.to_string()).unwrap_or_default()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
