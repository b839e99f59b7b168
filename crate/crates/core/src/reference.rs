//! Published LPPLS fits for four Chinese city housing-price indices,
//! bundled as CSV fixtures with columns `t1,tc,m,w,A,B,C,BmCw,Ind`. Every
//! window ends at 2017-05.

use serde::{Deserialize, Serialize};

use crate::filter::{qualify, DampingInput, FilterThresholds, FitValues, QualificationReport};
use crate::series::{MonthStamp, SeriesError, Window};

const SHANGHAI: &str = include_str!("../fixtures/shanghai.csv");
const SHENZHEN: &str = include_str!("../fixtures/shenzhen.csv");
const TIANJIN: &str = include_str!("../fixtures/tianjin.csv");
const CHENGDU: &str = include_str!("../fixtures/chengdu.csv");

/// Common window end of the bundled tables.
pub fn reference_t2() -> MonthStamp {
    MonthStamp::new(2017, 5).expect("valid month")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub t1: MonthStamp,
    pub tc: MonthStamp,
    pub m: f64,
    #[serde(rename = "w")]
    pub omega: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "BmCw")]
    pub damping: f64,
    #[serde(rename = "Ind")]
    pub indicator: u8,
}

/// How a month-resolution critical time maps onto the month axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TcConvention {
    /// The first instant of the month.
    MonthStart,
    /// The middle of the month. A fitted critical time lies strictly after
    /// the last observation, so a stamp equal to `t2` means "during t2".
    MidMonth,
}

impl TcConvention {
    pub fn offset(self) -> f64 {
        match self {
            TcConvention::MonthStart => 0.0,
            TcConvention::MidMonth => 0.5,
        }
    }
}

pub fn parse_reference_csv(text: &str) -> Result<Vec<ReferenceRow>, SeriesError> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    rdr.deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| SeriesError::Csv(format!("row {}: {e}", i + 1))))
        .collect()
}

/// The four bundled tables, keyed by city.
pub fn bundled() -> Vec<(&'static str, Vec<ReferenceRow>)> {
    [
        ("Shanghai", SHANGHAI),
        ("Shenzhen", SHENZHEN),
        ("Tianjin", TIANJIN),
        ("Chengdu", CHENGDU),
    ]
    .into_iter()
    .map(|(name, text)| {
        (
            name,
            parse_reference_csv(text).expect("bundled fixture parses"),
        )
    })
    .collect()
}

/// Re-qualifies published rows using their reported damping ratio, since
/// the rounded `B` and `C` columns cannot reproduce it.
pub fn replay(
    rows: &[ReferenceRow],
    t2: MonthStamp,
    convention: TcConvention,
    th: &FilterThresholds,
) -> Result<Vec<QualificationReport>, SeriesError> {
    rows.iter()
        .map(|r| {
            let w = Window::new(r.t1, t2)?;
            let v = FitValues {
                tc: r.tc.as_months() + convention.offset(),
                m: r.m,
                omega: r.omega,
                damping: DampingInput::Reported(r.damping),
            };
            Ok(qualify(&v, &w, th))
        })
        .collect()
}
