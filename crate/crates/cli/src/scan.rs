use bubblescope_core::calibrate::FitConfig;
use bubblescope_core::filter::{scan, FilterThresholds, Preset, ScanResult};
use bubblescope_core::series::{load_csv, CsvConfig};
use bubblescope_core::{MonthStamp, PriceSeries};
use serde::Serialize;

use crate::config::{Format, RunConfig};
use crate::error::CliError;
use crate::output::{fixed3, slug, OutputSet};

pub const SCAN_JSON: &str = "scan.json";
pub const STRENGTH_CSV: &str = "strength.csv";

/// One window in appendix layout, plus what the filter saw.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub t1: MonthStamp,
    /// Critical time on the month axis (months since 2000-01).
    pub tc: f64,
    /// Month containing `tc`.
    pub tc_month: Option<MonthStamp>,
    pub m: f64,
    pub w: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub phi: f64,
    #[serde(rename = "BmCw")]
    pub damping: f64,
    pub oscillation_count: f64,
    pub conditions: [bool; 5],
    #[serde(rename = "Ind")]
    pub indicator: u8,
    pub sse: f64,
    pub converged: bool,
    pub condition_flag: bool,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesScan {
    pub label: String,
    pub windows: usize,
    pub positives: usize,
    pub strength: f64,
    pub diagnosis: char,
    pub rows: Vec<ScanRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport {
    pub t2: MonthStamp,
    pub t1_start: MonthStamp,
    pub t1_end: MonthStamp,
    pub preset: Preset,
    pub fit: FitConfig,
    pub thresholds: FilterThresholds,
    pub series: Vec<SeriesScan>,
}

fn to_rows(result: &ScanResult) -> Vec<ScanRow> {
    result
        .entries
        .iter()
        .map(|e| {
            let p = &e.fit.params;
            let r = &e.report;
            ScanRow {
                t1: e.t1,
                tc: p.tc,
                tc_month: p.tc.is_finite().then(|| MonthStamp::containing(p.tc)),
                m: p.m,
                w: p.omega,
                a: p.a,
                b: p.b,
                c: p.c,
                phi: p.phi,
                damping: r.damping,
                oscillation_count: r.oscillation_count,
                conditions: [r.c_m, r.c_omega, r.c_tc, r.c_osc, r.c_damp],
                indicator: r.indicator,
                sse: e.fit.sse,
                converged: e.fit.converged,
                condition_flag: e.fit.condition_flag,
                failure: e.failure.clone(),
            }
        })
        .collect()
}

pub fn scan_series(
    label: &str,
    series: &PriceSeries,
    cfg: &RunConfig,
) -> Result<SeriesScan, CliError> {
    let result = scan(
        series,
        cfg.t2,
        (cfg.t1_start, cfg.t1_end),
        &cfg.fit,
        &cfg.thresholds(),
    )
    .map_err(|e| CliError::from(e).context(label))?;
    let positives = result.positives();
    Ok(SeriesScan {
        label: label.to_string(),
        windows: result.entries.len(),
        positives,
        strength: result.strength,
        diagnosis: if positives > 0 { 'Y' } else { 'N' },
        rows: to_rows(&result),
    })
}

pub fn run_scan(cfg: &RunConfig) -> Result<(ScanReport, OutputSet), CliError> {
    let input = cfg.require_input()?;
    let csv_cfg = CsvConfig {
        columns: cfg.columns.clone(),
    };
    let data = load_csv(input, &csv_cfg)
        .map_err(|e| CliError::from(e).context(&input.display().to_string()))?;
    let series = data
        .iter()
        .map(|(label, s)| scan_series(label, s, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let report = ScanReport {
        t2: cfg.t2,
        t1_start: cfg.t1_start,
        t1_end: cfg.t1_end,
        preset: cfg.preset,
        fit: cfg.fit,
        thresholds: cfg.thresholds(),
        series,
    };
    let mut out = OutputSet::default();
    if cfg.wants(Format::Json) {
        out.add_json(cfg.out.join(SCAN_JSON), &report)?;
    }
    if cfg.wants(Format::Csv) {
        for s in &report.series {
            out.add(
                cfg.out.join(format!("scan_{}.csv", slug(&s.label))),
                appendix_csv(s),
            );
        }
        out.add(cfg.out.join(STRENGTH_CSV), strength_csv(&report));
    }
    Ok((report, out))
}

/// `t1,tc,m,w,A,B,C,BmCw,Ind` at three decimals, `tc` as its month.
pub fn appendix_csv(s: &SeriesScan) -> String {
    let mut body = String::from("t1,tc,m,w,A,B,C,BmCw,Ind\n");
    for r in &s.rows {
        let tc = r
            .tc_month
            .map_or_else(|| "NaN".to_string(), |m| m.to_string());
        body.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.t1,
            tc,
            fixed3(r.m),
            fixed3(r.w),
            fixed3(r.a),
            fixed3(r.b),
            fixed3(r.c),
            fixed3(r.damping),
            r.indicator
        ));
    }
    body
}

pub fn strength_csv(report: &ScanReport) -> String {
    let mut body = String::from("series,diagnosis,positives,windows,strength\n");
    for s in &report.series {
        body.push_str(&format!(
            "{},{},{},{},{:.2}%\n",
            s.label,
            s.diagnosis,
            s.positives,
            s.windows,
            100.0 * s.strength
        ));
    }
    body
}
