use bubblescope_core::regression::{
    fundamental_bubble_test, integration_order, stars, DecisionBranch, Deterministic,
    IntegrationOrder, RegressionError, Significance,
};
use bubblescope_core::series::{load_csv, CsvConfig};
use bubblescope_core::PriceSeries;
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::config::{Format, RunConfig};
use crate::error::CliError;
use crate::output::{fixed3, OutputSet};

pub const COINT_JSON: &str = "coint.json";
pub const COINT_CSV: &str = "coint.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCell {
    /// `None` when not evaluated or of order two or higher.
    pub fundamental_order: Option<IntegrationOrder>,
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
    /// `None` when the fundamental is of order two or higher.
    pub branch: Option<DecisionBranch>,
    pub bubble_flag: bool,
    pub degenerate: bool,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CointRow {
    pub label: String,
    /// `None` for a price of order two or higher.
    pub price_order: Option<IntegrationOrder>,
    /// Keyed by factor; a factor absent for this series has no entry.
    pub cells: IndexMap<String, PairCell>,
    /// `Y` when at least one fundamental fails to anchor the price.
    pub verdict: char,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CointReport {
    pub level: Significance,
    pub trend: Deterministic,
    pub factors: Vec<String>,
    pub rows: Vec<CointRow>,
}

type Grouped = IndexMap<String, Vec<(String, PriceSeries)>>;

/// Groups `Series.Factor` columns by series.
fn group_fundamentals(
    data: IndexMap<String, PriceSeries>,
) -> Result<(Vec<String>, Grouped), CliError> {
    let mut factors: Vec<String> = Vec::new();
    let mut grouped = Grouped::new();
    for (column, s) in data {
        let (label, factor) = column.rsplit_once('.').ok_or_else(|| {
            CliError::Validation(format!(
                "fundamental column {column:?} is not named Series.Factor"
            ))
        })?;
        if !factors.iter().any(|f| f == factor) {
            factors.push(factor.to_string());
        }
        grouped
            .entry(label.to_string())
            .or_default()
            .push((factor.to_string(), s));
    }
    Ok((factors, grouped))
}

pub fn coint_row(
    label: &str,
    price: &PriceSeries,
    fundamentals: &[(String, PriceSeries)],
    cfg: &RunConfig,
) -> Result<CointRow, CliError> {
    let eg = cfg.eg();
    let price_order = match integration_order(price.values(), eg.trend, eg.lags, Significance::Five)
    {
        Ok(o) => o,
        // Not I(0), and no I(1) fundamental can anchor it.
        Err(RegressionError::OrderAtLeastTwo) => {
            return Ok(CointRow {
                label: label.to_string(),
                price_order: None,
                cells: IndexMap::new(),
                verdict: 'Y',
                note: Some("price integrated of order two or higher: no EG test".into()),
            })
        }
        Err(e) => return Err(CliError::from(e).context(label)),
    };
    if price_order == IntegrationOrder::I0 {
        return Ok(CointRow {
            label: label.to_string(),
            price_order: Some(price_order),
            cells: IndexMap::new(),
            verdict: 'N',
            note: Some("price is I(0): excluded".into()),
        });
    }
    let mut cells = IndexMap::new();
    for (factor, f) in fundamentals {
        let name = format!("{label}.{factor}");
        if f.start() != price.start() || f.len() != price.len() {
            return Err(CliError::Validation(format!(
                "{name} spans {}..{} but {label} spans {}..{}",
                f.start(),
                f.end(),
                price.start(),
                price.end()
            )));
        }
        let cell = match fundamental_bubble_test(price.values(), f.values(), &eg) {
            Ok(r) => PairCell {
                fundamental_order: r.fundamental_order,
                statistic: r.eg_statistic,
                p_value: r.eg_p_value,
                branch: Some(r.branch),
                bubble_flag: r.bubble_flag,
                degenerate: r.degenerate,
                note: None,
            },
            Err(RegressionError::OrderAtLeastTwo) => PairCell {
                fundamental_order: None,
                statistic: None,
                p_value: None,
                branch: None,
                bubble_flag: true,
                degenerate: false,
                note: Some(format!("{name} integrated of order two or higher")),
            },
            Err(e) => return Err(CliError::from(e).context(&name)),
        };
        cells.insert(factor.clone(), cell);
    }
    let verdict = if cells.values().any(|c| c.bubble_flag) {
        'Y'
    } else {
        'N'
    };
    let notes: Vec<String> = cells.values().filter_map(|c| c.note.clone()).collect();
    Ok(CointRow {
        label: label.to_string(),
        price_order: Some(price_order),
        cells,
        verdict,
        note: (!notes.is_empty()).then(|| notes.join("; ")),
    })
}

pub fn run_coint(cfg: &RunConfig) -> Result<(CointReport, OutputSet), CliError> {
    let input = cfg.require_input()?;
    let fpath = cfg.fundamentals.as_deref().ok_or_else(|| {
        CliError::Validation("no fundamentals input given (--fundamentals)".into())
    })?;
    let csv_cfg = CsvConfig {
        columns: cfg.columns.clone(),
    };
    let prices = load_csv(input, &csv_cfg)
        .map_err(|e| CliError::from(e).context(&input.display().to_string()))?;
    let funds = load_csv(fpath, &CsvConfig::default())
        .map_err(|e| CliError::from(e).context(&fpath.display().to_string()))?;
    let (factors, grouped) = group_fundamentals(funds)?;
    let rows = prices
        .iter()
        .map(|(label, p)| {
            let f = grouped.get(label).ok_or_else(|| {
                CliError::Validation(format!("{}: no {label}.* columns", fpath.display()))
            })?;
            coint_row(label, p, f, cfg)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let report = CointReport {
        level: cfg.eg_level,
        trend: cfg.eg_trend,
        factors,
        rows,
    };
    let mut out = OutputSet::default();
    if cfg.wants(Format::Json) {
        out.add_json(cfg.out.join(COINT_JSON), &report)?;
    }
    if cfg.wants(Format::Csv) {
        out.add(cfg.out.join(COINT_CSV), grid_csv(&report));
    }
    Ok((report, out))
}

fn cell_text(row: &CointRow, factor: &str) -> (String, String) {
    if row.price_order != Some(IntegrationOrder::I1) {
        return ("N/A".into(), "N/A".into());
    }
    match row.cells.get(factor) {
        None => ("-".into(), "-".into()),
        Some(PairCell {
            statistic: Some(s),
            p_value: Some(p),
            ..
        }) => (fixed3(*s), format!("({p:.4}){}", stars(*p))),
        Some(_) => ("N/A".into(), "N/A".into()),
    }
}

/// Statistic on the series line, parenthesised p-value and stars below it.
pub fn grid_csv(report: &CointReport) -> String {
    let mut body = String::from("series");
    for f in &report.factors {
        body.push(',');
        body.push_str(f);
    }
    body.push_str(",EG,note\n");
    for row in &report.rows {
        let cells: Vec<(String, String)> =
            report.factors.iter().map(|f| cell_text(row, f)).collect();
        body.push_str(&row.label);
        for (s, _) in &cells {
            body.push(',');
            body.push_str(s);
        }
        body.push_str(&format!(
            ",{},{}\n",
            row.verdict,
            row.note.as_deref().unwrap_or("")
        ));
        for (_, p) in &cells {
            body.push(',');
            body.push_str(p);
        }
        body.push_str(",,\n");
    }
    body
}
