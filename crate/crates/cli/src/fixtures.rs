use bubblescope_core::filter::{strength, Preset};
use bubblescope_core::reference::{
    bundled, parse_reference_csv, reference_t2, replay, ReferenceRow, TcConvention,
};
use bubblescope_core::MonthStamp;
use serde::Serialize;

use crate::config::{Format, RunConfig};
use crate::error::CliError;
use crate::output::{fixed3, OutputSet};

pub const REPLAY_JSON: &str = "replay.json";
pub const REPLAY_CSV: &str = "replay.csv";

#[derive(Debug, Clone, Serialize)]
pub struct ReplayRow {
    pub t1: MonthStamp,
    pub tc: MonthStamp,
    pub oscillation_count: f64,
    pub damping: f64,
    pub published: u8,
    pub replayed: u8,
}

#[derive(Debug, Clone, Serialize)]
pub struct TableReplay {
    pub label: String,
    pub rows: Vec<ReplayRow>,
    pub published_positives: usize,
    pub replayed_positives: usize,
    pub strength: f64,
    pub matched: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReplayReport {
    pub preset: Preset,
    pub convention: TcConvention,
    pub t2: MonthStamp,
    pub tables: Vec<TableReplay>,
}

pub fn replay_table(
    label: &str,
    rows: &[ReferenceRow],
    t2: MonthStamp,
    convention: TcConvention,
    preset: Preset,
) -> Result<TableReplay, CliError> {
    let reports = replay(rows, t2, convention, &preset.thresholds())
        .map_err(|e| CliError::from(e).context(label))?;
    let rows: Vec<ReplayRow> = rows
        .iter()
        .zip(&reports)
        .map(|(r, q)| ReplayRow {
            t1: r.t1,
            tc: r.tc,
            oscillation_count: q.oscillation_count,
            damping: q.damping,
            published: r.indicator,
            replayed: q.indicator,
        })
        .collect();
    let ind: Vec<u8> = rows.iter().map(|r| r.replayed).collect();
    Ok(TableReplay {
        label: label.to_string(),
        published_positives: rows.iter().filter(|r| r.published == 1).count(),
        replayed_positives: rows.iter().filter(|r| r.replayed == 1).count(),
        strength: strength(&ind),
        matched: rows.iter().filter(|r| r.published == r.replayed).count(),
        rows,
    })
}

/// Replays the bundled tables, or a single table from `cfg.input` ending
/// at `cfg.t2`.
pub fn run_fixtures(
    cfg: &RunConfig,
    convention: TcConvention,
) -> Result<(ReplayReport, OutputSet), CliError> {
    let (t2, tables) = match &cfg.input {
        None => (
            reference_t2(),
            bundled()
                .into_iter()
                .map(|(l, rows)| (l.to_string(), rows))
                .collect::<Vec<_>>(),
        ),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let rows = parse_reference_csv(&text)
                .map_err(|e| CliError::from(e).context(&path.display().to_string()))?;
            let label = path
                .file_stem()
                .map_or("table".into(), |s| s.to_string_lossy().into_owned());
            (cfg.t2, vec![(label, rows)])
        }
    };
    let tables = tables
        .iter()
        .map(|(l, rows)| replay_table(l, rows, t2, convention, cfg.preset))
        .collect::<Result<Vec<_>, _>>()?;
    let report = ReplayReport {
        preset: cfg.preset,
        convention,
        t2,
        tables,
    };
    let mut out = OutputSet::default();
    if cfg.wants(Format::Json) {
        out.add_json(cfg.out.join(REPLAY_JSON), &report)?;
    }
    if cfg.wants(Format::Csv) {
        let mut body = String::from("series,t1,tc,oscillations,BmCw,Ind_published,Ind\n");
        for t in &report.tables {
            for r in &t.rows {
                body.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    t.label,
                    r.t1,
                    r.tc,
                    fixed3(r.oscillation_count),
                    fixed3(r.damping),
                    r.published,
                    r.replayed
                ));
            }
        }
        out.add(cfg.out.join(REPLAY_CSV), body);
    }
    Ok((report, out))
}
