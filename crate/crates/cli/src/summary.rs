use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coint::{CointReport, COINT_JSON};
use crate::config::{Format, RunConfig};
use crate::error::CliError;
use crate::output::OutputSet;
use crate::scan::SCAN_JSON;

pub const SUMMARY_JSON: &str = "summary.json";
pub const SUMMARY_CSV: &str = "summary.csv";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosisSummary {
    pub label: String,
    pub eg: char,
    pub lppls: char,
    pub strength: f64,
    pub overall: char,
}

impl DiagnosisSummary {
    pub fn new(label: &str, eg: bool, strength: f64) -> Self {
        let lppls = strength > 0.0;
        let yn = |b: bool| if b { 'Y' } else { 'N' };
        Self {
            label: label.to_string(),
            eg: yn(eg),
            lppls: yn(lppls),
            strength,
            overall: yn(eg || lppls),
        }
    }
}

#[derive(Deserialize)]
struct StrengthOnly {
    label: String,
    strength: f64,
}

#[derive(Deserialize)]
struct ScanStrengths {
    series: Vec<StrengthOnly>,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::io(
            path,
            format!("{e} (run the pipeline that produces it first)"),
        )
    })?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

pub fn combine(
    scan: &[(String, f64)],
    coint: &CointReport,
) -> Result<Vec<DiagnosisSummary>, CliError> {
    scan.iter()
        .map(|(label, strength)| {
            let row = coint
                .rows
                .iter()
                .find(|r| &r.label == label)
                .ok_or_else(|| {
                    CliError::Validation(format!("{label}: missing from {COINT_JSON}"))
                })?;
            Ok(DiagnosisSummary::new(label, row.verdict == 'Y', *strength))
        })
        .collect()
}

pub fn run_summary(cfg: &RunConfig) -> Result<(Vec<DiagnosisSummary>, OutputSet), CliError> {
    let scan: ScanStrengths = read_json(&cfg.out.join(SCAN_JSON))?;
    let coint: CointReport = read_json(&cfg.out.join(COINT_JSON))?;
    let scan: Vec<(String, f64)> = scan
        .series
        .into_iter()
        .map(|s| (s.label, s.strength))
        .collect();
    if let Some(extra) = coint
        .rows
        .iter()
        .find(|r| !scan.iter().any(|(l, _)| *l == r.label))
    {
        return Err(CliError::Validation(format!(
            "{}: missing from {SCAN_JSON}",
            extra.label
        )));
    }
    let rows = combine(&scan, &coint)?;
    let mut out = OutputSet::default();
    if cfg.wants(Format::Json) {
        out.add_json(cfg.out.join(SUMMARY_JSON), &rows)?;
    }
    if cfg.wants(Format::Csv) {
        let mut body = String::from("series,EG,LPPLS,Overall,strength\n");
        for r in &rows {
            body.push_str(&format!(
                "{},{},{},{},{:.2}%\n",
                r.label,
                r.eg,
                r.lppls,
                r.overall,
                100.0 * r.strength
            ));
        }
        out.add(cfg.out.join(SUMMARY_CSV), body);
    }
    Ok((rows, out))
}
