//! Qualification of LPPLS fits and the rolling-window scan.
//!
//! A fit qualifies as a bubble signature when every enabled condition holds:
//!
//! | condition   | requirement                                      |
//! |-------------|--------------------------------------------------|
//! | m           | `m_lo <= m <= m_hi`                              |
//! | omega       | `omega_lo <= omega <= omega_hi`                  |
//! | tc          | `t2 + lo * dt <= tc <= t2 + hi * dt`             |
//! | oscillation | `(omega / 2 pi) ln[(tc - t1) / (tc - t2)] >= k`  |
//! | damping     | `abs(m B / (omega C)) >= d`                      |

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibrate::{fit_log_prices, CalibrateError, FitConfig, LpplsFit};
use crate::series::{month_diff, MonthStamp, PriceSeries, SeriesError, Window};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error("critical time {tc} does not lie after window start {t1}")]
    CriticalTimeBeforeStart { t1: f64, tc: f64 },
    #[error("invalid thresholds: {0}")]
    Thresholds(String),
    #[error("invalid scan range: {0}")]
    Range(String),
    #[error("unknown preset {0:?} (expected paper-consistent or strict)")]
    UnknownPreset(String),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Calibrate(#[from] CalibrateError),
}

/// Which conditions take part in the indicator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnabledConditions {
    pub m: bool,
    pub omega: bool,
    pub tc: bool,
    pub oscillation: bool,
    pub damping: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterThresholds {
    pub m_lo: f64,
    pub m_hi: f64,
    pub omega_lo: f64,
    pub omega_hi: f64,
    /// Critical-time window around `t2`, as signed fractions of `dt`.
    pub tc_lo_fraction: f64,
    pub tc_hi_fraction: f64,
    pub oscillation_min: f64,
    pub damping_min: f64,
    pub enabled: EnabledConditions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// All conditions except the oscillation count, which the published
    /// indicator columns do not honour.
    PaperConsistent,
    Strict,
}

impl Preset {
    pub fn thresholds(self) -> FilterThresholds {
        match self {
            Preset::PaperConsistent => FilterThresholds::paper_consistent(),
            Preset::Strict => FilterThresholds::strict(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::PaperConsistent => "paper-consistent",
            Preset::Strict => "strict",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = FilterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper-consistent" => Ok(Preset::PaperConsistent),
            "strict" => Ok(Preset::Strict),
            other => Err(FilterError::UnknownPreset(other.to_string())),
        }
    }
}

impl FilterThresholds {
    pub fn strict() -> Self {
        Self {
            m_lo: 0.01,
            m_hi: 0.99,
            omega_lo: 2.0,
            omega_hi: 25.0,
            tc_lo_fraction: -0.05,
            tc_hi_fraction: 0.1,
            oscillation_min: 2.5,
            damping_min: 1.0,
            enabled: EnabledConditions {
                m: true,
                omega: true,
                tc: true,
                oscillation: true,
                damping: true,
            },
        }
    }

    pub fn paper_consistent() -> Self {
        let mut t = Self::strict();
        t.enabled.oscillation = false;
        t
    }

    pub fn validate(&self) -> Result<(), FilterError> {
        let ordered = self.m_lo < self.m_hi
            && self.omega_lo < self.omega_hi
            && self.tc_lo_fraction < self.tc_hi_fraction;
        if !ordered {
            return Err(FilterError::Thresholds(
                "each interval needs lo < hi".into(),
            ));
        }
        if self.oscillation_min.is_nan() || self.damping_min.is_nan() {
            return Err(FilterError::Thresholds("NaN threshold".into()));
        }
        Ok(())
    }
}

impl Default for FilterThresholds {
    fn default() -> Self {
        Self::paper_consistent()
    }
}

/// `(omega / 2 pi) ln[(tc - t1) / (tc - t2)]`. Infinite at `tc == t2` and
/// NaN (a failing verdict) for `t1 < tc < t2`.
pub fn oscillation_count(t1: f64, t2: f64, tc: f64, omega: f64) -> Result<f64, FilterError> {
    if !(tc > t1) {
        return Err(FilterError::CriticalTimeBeforeStart { t1, tc });
    }
    if tc == t2 {
        return Ok(f64::INFINITY);
    }
    if tc < t2 {
        return Ok(f64::NAN);
    }
    Ok(omega / TAU * ((tc - t1) / (tc - t2)).ln())
}

/// `abs(m B / (omega C))`, with `0 / 0 = 0` and `x / 0 = inf`.
pub fn damping(m: f64, b: f64, omega: f64, c: f64) -> f64 {
    let num = (m * b).abs();
    let den = (omega * c).abs();
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

/// Damping ratio source: recomputed from coefficients, or taken as given.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DampingInput {
    Coefficients { b: f64, c: f64 },
    Reported(f64),
}

/// The quantities the filter looks at; `tc` in months on the series axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitValues {
    pub tc: f64,
    pub m: f64,
    pub omega: f64,
    pub damping: DampingInput,
}

impl From<&LpplsFit> for FitValues {
    fn from(fit: &LpplsFit) -> Self {
        Self {
            tc: fit.params.tc,
            m: fit.params.m,
            omega: fit.params.omega,
            damping: DampingInput::Coefficients {
                b: fit.params.b,
                c: fit.params.c,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualificationReport {
    pub c_m: bool,
    pub c_omega: bool,
    pub c_tc: bool,
    pub c_osc: bool,
    pub c_damp: bool,
    pub oscillation_count: f64,
    pub damping: f64,
    pub indicator: u8,
}

impl QualificationReport {
    fn rejected() -> Self {
        Self {
            c_m: false,
            c_omega: false,
            c_tc: false,
            c_osc: false,
            c_damp: false,
            oscillation_count: f64::NAN,
            damping: f64::NAN,
            indicator: 0,
        }
    }
}

/// Evaluates every condition and combines the enabled ones. Degenerate
/// inputs (NaN, `tc <= t1`) fail the affected conditions.
pub fn qualify(v: &FitValues, window: &Window, th: &FilterThresholds) -> QualificationReport {
    let t1 = window.t1().as_months();
    let t2 = window.t2().as_months();
    let dt = window.dt();

    let c_m = th.m_lo <= v.m && v.m <= th.m_hi;
    let c_omega = th.omega_lo <= v.omega && v.omega <= th.omega_hi;
    let c_tc = t2 + th.tc_lo_fraction * dt <= v.tc && v.tc <= t2 + th.tc_hi_fraction * dt;
    let osc = oscillation_count(t1, t2, v.tc, v.omega).unwrap_or(f64::NAN);
    let c_osc = osc >= th.oscillation_min;
    let damp = match v.damping {
        DampingInput::Coefficients { b, c } => damping(v.m, b, v.omega, c),
        DampingInput::Reported(d) => d,
    };
    let c_damp = damp >= th.damping_min;

    let e = &th.enabled;
    let pass = (!e.m || c_m)
        && (!e.omega || c_omega)
        && (!e.tc || c_tc)
        && (!e.oscillation || c_osc)
        && (!e.damping || c_damp);
    QualificationReport {
        c_m,
        c_omega,
        c_tc,
        c_osc,
        c_damp,
        oscillation_count: osc,
        damping: damp,
        indicator: pass as u8,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanEntry {
    pub t1: MonthStamp,
    pub fit: LpplsFit,
    pub report: QualificationReport,
    /// Why the window was counted as a non-signal regardless of the filter.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub t2: MonthStamp,
    pub entries: Vec<ScanEntry>,
    pub strength: f64,
}

impl ScanResult {
    pub fn positives(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| e.report.indicator == 1)
            .count()
    }
}

/// Share of ones in an indicator vector; 0 for an empty one.
pub fn strength(indicators: &[u8]) -> f64 {
    if indicators.is_empty() {
        return 0.0;
    }
    indicators.iter().filter(|&&i| i == 1).count() as f64 / indicators.len() as f64
}

/// Fits and qualifies one window per month `t1` in `t1_range` (inclusive),
/// all ending at `t2`. Windows without a usable fit count as zeros; fits
/// stopped by the iteration limit are still qualified.
pub fn scan(
    series: &PriceSeries,
    t2: MonthStamp,
    t1_range: (MonthStamp, MonthStamp),
    config: &FitConfig,
    th: &FilterThresholds,
) -> Result<ScanResult, FilterError> {
    th.validate()?;
    config.validate()?;
    let (first, last) = t1_range;
    if first > last {
        return Err(FilterError::Range(format!(
            "t1 start {first} after t1 end {last}"
        )));
    }
    if last >= t2 {
        return Err(FilterError::Range(format!(
            "t1 end {last} not before t2 {t2}"
        )));
    }
    let windows = (0..=month_diff(last, first))
        .map(|k| Window::new(first.add_months(k), t2))
        .collect::<Result<Vec<_>, _>>()?;
    series.slice(&windows[0])?;
    let logs = series.log_values();
    let offset = month_diff(first, series.start()) as usize;
    let end = month_diff(t2, series.start()) as usize;

    let entries = windows
        .par_iter()
        .enumerate()
        .map(|(k, w)| -> Result<ScanEntry, FilterError> {
            let fit = fit_log_prices(&logs[offset + k..=end], w, config)?;
            let failure = fit
                .degenerate
                .then(|| fit.note.clone().unwrap_or_else(|| "no usable fit".into()));
            let report = if failure.is_some() {
                QualificationReport::rejected()
            } else {
                qualify(&FitValues::from(&fit), w, th)
            };
            Ok(ScanEntry {
                t1: w.t1(),
                fit,
                report,
                failure,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let ind: Vec<u8> = entries.iter().map(|e| e.report.indicator).collect();
    Ok(ScanResult {
        t2,
        strength: strength(&ind),
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::parse_month;
    use proptest::prelude::*;

    fn win(t1: &str, t2: &str) -> Window {
        Window::new(parse_month(t1).unwrap(), parse_month(t2).unwrap()).unwrap()
    }

    fn months(s: &str) -> f64 {
        parse_month(s).unwrap().as_months()
    }

    #[test]
    fn oscillation_count_examples() {
        let e = std::f64::consts::E;
        let v = oscillation_count(0.0, e - 1.0, e, TAU).unwrap();
        assert_eq!(v, 1.0);
        assert_eq!(
            oscillation_count(0.0, 50.0, 50.0, 6.0).unwrap(),
            f64::INFINITY
        );
        assert!(oscillation_count(0.0, 50.0, 49.0, 6.0).unwrap().is_nan());
        assert!(oscillation_count(10.0, 50.0, 10.0, 6.0).is_err());

        let v =
            oscillation_count(months("200801"), months("201705"), months("201709"), 3.172).unwrap();
        let expected = 3.172 / TAU * (116.0f64 / 4.0).ln();
        assert_eq!(v, expected);
        assert!((v - 1.70).abs() < 0.005);
    }

    #[test]
    fn damping_examples() {
        assert_eq!(damping(0.5, -2.0, 1.0, 1.0), 1.0);
        assert_eq!(damping(0.5, -1.0, 6.0, 0.0), f64::INFINITY);
        assert_eq!(damping(0.5, 0.0, 6.0, 0.0), 0.0);
    }

    #[test]
    fn qualify_published_rows() {
        let th = FilterThresholds::paper_consistent();
        let w = win("200803", "201705");
        let shenzhen = FitValues {
            tc: months("201709"),
            m: 1.0,
            omega: 3.089,
            damping: DampingInput::Reported(1.024),
        };
        let r = qualify(&shenzhen, &w, &th);
        assert!(!r.c_m && r.c_omega && r.c_tc && r.c_damp);
        assert_eq!(r.indicator, 0);

        let tianjin = FitValues {
            tc: months("201705"),
            m: 0.801,
            omega: 1.953,
            damping: DampingInput::Reported(1.296),
        };
        let r = qualify(&tianjin, &w, &th);
        assert!(!r.c_omega);
        assert_eq!(r.indicator, 0);

        let chengdu = FitValues {
            tc: months("201709"),
            m: 0.92,
            omega: 10.553,
            damping: DampingInput::Reported(0.419),
        };
        let r = qualify(&chengdu, &win("200801", "201705"), &th);
        assert!(r.c_m && r.c_omega && r.c_tc && !r.c_damp);
        assert_eq!(r.indicator, 0);
    }

    #[test]
    fn degenerate_values_fail_rather_than_panic() {
        let w = win("200801", "201705");
        let v = FitValues {
            tc: f64::NAN,
            m: f64::NAN,
            omega: f64::NAN,
            damping: DampingInput::Coefficients {
                b: f64::NAN,
                c: 0.0,
            },
        };
        let r = qualify(&v, &w, &FilterThresholds::strict());
        assert_eq!(r.indicator, 0);
        assert!(!(r.c_m || r.c_omega || r.c_tc || r.c_osc || r.c_damp));
    }

    #[test]
    fn strength_values() {
        assert_eq!(strength(&[1; 34]), 1.0);
        let mut v = vec![0u8; 34];
        v[..6].fill(1);
        assert!((strength(&v) - 0.1765).abs() < 5e-5);
        assert_eq!(strength(&[0; 34]), 0.0);
        assert_eq!(strength(&[]), 0.0);
    }

    #[test]
    fn preset_names_round_trip() {
        for p in [Preset::PaperConsistent, Preset::Strict] {
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        }
        assert!("loose".parse::<Preset>().is_err());
        assert!(!Preset::PaperConsistent.thresholds().enabled.oscillation);
        assert!(Preset::Strict.thresholds().enabled.oscillation);
    }

    #[test]
    fn scan_rejects_bad_ranges() {
        let start = parse_month("200601").unwrap();
        let s = PriceSeries::new(start, (0..140).map(|i| 100.0 + i as f64).collect()).unwrap();
        let cfg = FitConfig::default();
        let th = FilterThresholds::default();
        let t2 = parse_month("201705").unwrap();
        let r = scan(
            &s,
            t2,
            (
                parse_month("201010").unwrap(),
                parse_month("200801").unwrap(),
            ),
            &cfg,
            &th,
        );
        assert!(matches!(r, Err(FilterError::Range(_))));
        // 201705 is beyond the series end (200601 + 139 = 201708 is fine, 201801 is not)
        let late = parse_month("201801").unwrap();
        let r = scan(
            &s,
            late,
            (
                parse_month("200801").unwrap(),
                parse_month("200802").unwrap(),
            ),
            &cfg,
            &th,
        );
        assert!(matches!(r, Err(FilterError::Series(_))));
    }

    proptest! {
        #[test]
        fn relaxing_thresholds_never_revokes(
            m in -0.2f64..1.2,
            omega in 0.0f64..30.0,
            tc_off in -10.0f64..15.0,
            d in 0.0f64..3.0,
            relax in 0.0f64..1.0,
            which in 0usize..8,
        ) {
            let w = win("200801", "201705");
            let v = FitValues { tc: w.t2().as_months() + tc_off, m, omega, damping: DampingInput::Reported(d) };
            let th = FilterThresholds::strict();
            let mut loose = th;
            match which {
                0 => loose.m_lo -= relax,
                1 => loose.m_hi += relax,
                2 => loose.omega_lo -= relax,
                3 => loose.omega_hi += relax,
                4 => loose.tc_lo_fraction -= relax,
                5 => loose.tc_hi_fraction += relax,
                6 => loose.oscillation_min -= relax,
                _ => loose.damping_min -= relax,
            }
            let a = qualify(&v, &w, &th).indicator;
            let b = qualify(&v, &w, &loose).indicator;
            prop_assert!(b >= a);
        }

        #[test]
        fn oscillation_count_ignores_time_unit(
            t1 in 0.0f64..50.0,
            len in 24.0f64..150.0,
            ahead in 0.01f64..30.0,
            omega in 0.5f64..25.0,
            unit in 0.01f64..100.0,
        ) {
            let t2 = t1 + len;
            let tc = t2 + ahead;
            let a = oscillation_count(t1, t2, tc, omega).unwrap();
            let b = oscillation_count(t1 * unit, t2 * unit, tc * unit, omega).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }

        #[test]
        fn strength_is_mean_indicator(v in proptest::collection::vec(0u8..2, 1..60)) {
            let s = strength(&v);
            let mean = v.iter().map(|&x| x as f64).sum::<f64>() / v.len() as f64;
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert!((s - mean).abs() < 1e-15);
        }
    }
}
