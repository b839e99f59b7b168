//! Monthly time axis, price series and CSV ingestion.
//!
//! All model arithmetic runs on a real-valued month axis whose origin is
//! January 2000 (`200001` maps to `0.0`). Stamps convert to that axis via
//! [`MonthStamp::index`].

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Smallest number of observations a window may cover.
pub const MIN_WINDOW_OBS: usize = 24;

const EPOCH_YEAR: i64 = 2000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("malformed month '{0}': expected YYYYMM or YYYY-MM")]
    MalformedMonth(String),
    #[error("month out of range in '{0}'")]
    MonthOutOfRange(String),
    #[error("series needs at least 2 observations, got {0}")]
    TooShort(usize),
    #[error("non-positive or non-finite value {value} at {at}")]
    NonPositive { at: MonthStamp, value: f64 },
    #[error("invalid window {t1}..{t2}: {reason}")]
    InvalidWindow {
        t1: MonthStamp,
        t2: MonthStamp,
        reason: String,
    },
    #[error("window {t1}..{t2} lies outside series span {start}..{end}")]
    OutOfSpan {
        t1: MonthStamp,
        t2: MonthStamp,
        start: MonthStamp,
        end: MonthStamp,
    },
    #[error("gap at {0}")]
    Gap(MonthStamp),
    #[error("duplicate or out-of-order month {0}")]
    Duplicate(MonthStamp),
    #[error("unparseable cell '{cell}' in column '{column}' at row {row}")]
    BadCell {
        row: usize,
        column: String,
        cell: String,
    },
    #[error("column '{0}' not found")]
    MissingColumn(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

/// A calendar month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct MonthStamp {
    year: i32,
    month: u8,
}

impl MonthStamp {
    pub fn new(year: i32, month: u32) -> Result<Self, SeriesError> {
        if !(1..=12).contains(&month) || !(0..=9999).contains(&year) {
            return Err(SeriesError::MonthOutOfRange(format!("{year:04}{month:02}")));
        }
        Ok(Self {
            year,
            month: month as u8,
        })
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn month(&self) -> u32 {
        self.month as u32
    }

    /// Months since January 2000.
    pub fn index(&self) -> i64 {
        (self.year as i64 - EPOCH_YEAR) * 12 + (self.month as i64 - 1)
    }

    pub fn from_index(index: i64) -> Self {
        let year = EPOCH_YEAR + index.div_euclid(12);
        let month = index.rem_euclid(12) + 1;
        Self {
            year: year as i32,
            month: month as u8,
        }
    }

    /// The month containing the real-valued month coordinate `t`.
    pub fn containing(t: f64) -> Self {
        Self::from_index(t.floor() as i64)
    }

    pub fn as_months(&self) -> f64 {
        self.index() as f64
    }

    pub fn add_months(&self, k: i64) -> Self {
        Self::from_index(self.index() + k)
    }
}

/// Parses the compact `YYYYMM` form.
pub fn parse_month(text: &str) -> Result<MonthStamp, SeriesError> {
    let t = text.trim();
    if t.len() != 6 || !t.bytes().all(|b| b.is_ascii_digit()) {
        return Err(SeriesError::MalformedMonth(text.to_string()));
    }
    let year: i32 = t[..4].parse().expect("digits");
    let month: u32 = t[4..].parse().expect("digits");
    MonthStamp::new(year, month).map_err(|_| SeriesError::MonthOutOfRange(text.to_string()))
}

/// Parses either `YYYYMM` or `YYYY-MM`.
pub fn parse_date_cell(text: &str) -> Result<MonthStamp, SeriesError> {
    let t = text.trim();
    match t.split_once('-') {
        Some((y, m)) if y.len() == 4 && m.len() == 2 => {
            parse_month(&format!("{y}{m}")).map_err(|e| match e {
                SeriesError::MalformedMonth(_) => SeriesError::MalformedMonth(text.to_string()),
                _ => SeriesError::MonthOutOfRange(text.to_string()),
            })
        }
        Some(_) => Err(SeriesError::MalformedMonth(text.to_string())),
        None => parse_month(t),
    }
}

/// Signed number of months from `b` to `a`.
pub fn month_diff(a: MonthStamp, b: MonthStamp) -> i64 {
    a.index() - b.index()
}

impl fmt::Display for MonthStamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}{:02}", self.year, self.month)
    }
}

impl FromStr for MonthStamp {
    type Err = SeriesError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_date_cell(s)
    }
}

impl TryFrom<String> for MonthStamp {
    type Error = SeriesError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        parse_month(&s)
    }
}

impl From<MonthStamp> for String {
    fn from(m: MonthStamp) -> Self {
        m.to_string()
    }
}

/// Closed month interval `[t1, t2]` used for one LPPLS fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    t1: MonthStamp,
    t2: MonthStamp,
}

impl Window {
    pub fn new(t1: MonthStamp, t2: MonthStamp) -> Result<Self, SeriesError> {
        if t1 >= t2 {
            return Err(SeriesError::InvalidWindow {
                t1,
                t2,
                reason: "t1 must precede t2".into(),
            });
        }
        let obs = month_diff(t2, t1) as usize + 1;
        if obs < MIN_WINDOW_OBS {
            return Err(SeriesError::InvalidWindow {
                t1,
                t2,
                reason: format!("{obs} observations, minimum is {MIN_WINDOW_OBS}"),
            });
        }
        Ok(Self { t1, t2 })
    }

    pub fn t1(&self) -> MonthStamp {
        self.t1
    }

    pub fn t2(&self) -> MonthStamp {
        self.t2
    }

    /// Window length `t2 - t1` in months.
    pub fn dt(&self) -> f64 {
        month_diff(self.t2, self.t1) as f64
    }

    pub fn n_obs(&self) -> usize {
        month_diff(self.t2, self.t1) as usize + 1
    }
}

/// Strictly positive prices on a gap-free monthly grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    start: MonthStamp,
    values: Vec<f64>,
}

impl PriceSeries {
    pub fn new(start: MonthStamp, values: Vec<f64>) -> Result<Self, SeriesError> {
        if values.len() < 2 {
            return Err(SeriesError::TooShort(values.len()));
        }
        if let Some((i, &v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(SeriesError::NonPositive {
                at: start.add_months(i as i64),
                value: v,
            });
        }
        Ok(Self { start, values })
    }

    /// Builds a series from log-prices.
    pub fn from_log(start: MonthStamp, log_values: &[f64]) -> Result<Self, SeriesError> {
        Self::new(start, log_values.iter().map(|v| v.exp()).collect())
    }

    pub fn start(&self) -> MonthStamp {
        self.start
    }

    pub fn end(&self) -> MonthStamp {
        self.start.add_months(self.values.len() as i64 - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn log_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.ln()).collect()
    }

    /// Month coordinates of every observation.
    pub fn times(&self) -> Vec<f64> {
        let s = self.start.as_months();
        (0..self.values.len()).map(|i| s + i as f64).collect()
    }

    pub fn stamps(&self) -> impl Iterator<Item = MonthStamp> + '_ {
        (0..self.values.len()).map(move |i| self.start.add_months(i as i64))
    }

    pub fn contains(&self, w: &Window) -> bool {
        w.t1 >= self.start && w.t2 <= self.end()
    }

    /// Sub-series covering `[t1, t2]` inclusive.
    pub fn slice(&self, w: &Window) -> Result<PriceSeries, SeriesError> {
        if !self.contains(w) {
            return Err(SeriesError::OutOfSpan {
                t1: w.t1,
                t2: w.t2,
                start: self.start,
                end: self.end(),
            });
        }
        let lo = month_diff(w.t1, self.start) as usize;
        let hi = month_diff(w.t2, self.start) as usize;
        Ok(PriceSeries {
            start: w.t1,
            values: self.values[lo..=hi].to_vec(),
        })
    }
}

/// Options for [`load_csv`].
#[derive(Debug, Clone, Default)]
pub struct CsvConfig {
    /// Value columns to keep; `None` keeps all of them.
    pub columns: Option<Vec<String>>,
}

/// Reads a header-first CSV whose first column is a month and whose
/// remaining columns are prices. Returns one series per value column in
/// file order.
pub fn load_csv(
    path: impl AsRef<Path>,
    config: &CsvConfig,
) -> Result<IndexMap<String, PriceSeries>, SeriesError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| SeriesError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_csv(&text, config)
}

pub fn parse_csv(
    text: &str,
    config: &CsvConfig,
) -> Result<IndexMap<String, PriceSeries>, SeriesError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| SeriesError::Csv(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.len() < 2 {
        return Err(SeriesError::Csv(
            "header must name a date column and at least one value column".into(),
        ));
    }
    let wanted: Vec<usize> = match &config.columns {
        None => (1..headers.len()).collect(),
        Some(cols) => cols
            .iter()
            .map(|c| {
                headers[1..]
                    .iter()
                    .position(|h| h == c)
                    .map(|p| p + 1)
                    .ok_or_else(|| SeriesError::MissingColumn(c.clone()))
            })
            .collect::<Result<_, _>>()?,
    };

    let mut start: Option<MonthStamp> = None;
    let mut prev: Option<MonthStamp> = None;
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); wanted.len()];
    for (row_idx, record) in reader.records().enumerate() {
        let row = row_idx + 2;
        let record = record.map_err(|e| SeriesError::Csv(e.to_string()))?;
        let date_cell = record.get(0).unwrap_or("");
        let stamp = parse_date_cell(date_cell).map_err(|_| SeriesError::BadCell {
            row,
            column: headers[0].clone(),
            cell: date_cell.to_string(),
        })?;
        if let Some(p) = prev {
            match month_diff(stamp, p) {
                1 => {}
                d if d <= 0 => return Err(SeriesError::Duplicate(stamp)),
                _ => return Err(SeriesError::Gap(p.add_months(1))),
            }
        } else {
            start = Some(stamp);
        }
        prev = Some(stamp);
        for (slot, &col) in wanted.iter().enumerate() {
            let cell = record.get(col).unwrap_or("");
            let v: f64 = cell.parse().map_err(|_| SeriesError::BadCell {
                row,
                column: headers[col].clone(),
                cell: cell.to_string(),
            })?;
            if !(v.is_finite() && v > 0.0) {
                return Err(SeriesError::NonPositive {
                    at: stamp,
                    value: v,
                });
            }
            columns[slot].push(v);
        }
    }
    let start = start.ok_or(SeriesError::TooShort(0))?;
    let mut out = IndexMap::new();
    for (slot, &col) in wanted.iter().enumerate() {
        let values = std::mem::take(&mut columns[slot]);
        out.insert(headers[col].clone(), PriceSeries::new(start, values)?);
    }
    Ok(out)
}

/// Renders aligned series in the ingestion format. All series must share
/// the same span.
pub fn to_csv_string(series: &[(&str, &PriceSeries)]) -> Result<String, SeriesError> {
    let first = series
        .first()
        .map(|(_, s)| *s)
        .ok_or_else(|| SeriesError::Csv("no series to write".into()))?;
    for (name, s) in series {
        if s.start() != first.start() || s.len() != first.len() {
            return Err(SeriesError::Csv(format!("series '{name}' is not aligned")));
        }
    }
    let mut out = String::from("date");
    for (name, _) in series {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (i, stamp) in first.stamps().enumerate() {
        out.push_str(&stamp.to_string());
        for (_, s) in series {
            out.push(',');
            // shortest round-trip representation
            out.push_str(&format!("{}", s.values()[i]));
        }
        out.push('\n');
    }
    Ok(out)
}
