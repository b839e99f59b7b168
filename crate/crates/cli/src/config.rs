//! Run configuration: defaults, a flat `key = value` file, the
//! `BUBBLESCOPE_SEED` environment variable and command-line flags, applied
//! in that order.
//!
//! | key          | default            |
//! |--------------|--------------------|
//! | input        | (none)             |
//! | fundamentals | (none)             |
//! | columns      | all price columns  |
//! | t2           | 201705             |
//! | t1_start     | 200801             |
//! | t1_end       | 201010             |
//! | n_starts     | 50                 |
//! | seed         | 0                  |
//! | preset       | paper-consistent   |
//! | eg_level     | 0.05               |
//! | eg_trend     | ct                 |
//! | out          | out                |
//! | format       | csv,json           |

use std::path::{Path, PathBuf};

use bubblescope_core::calibrate::FitConfig;
use bubblescope_core::filter::{FilterThresholds, Preset};
use bubblescope_core::regression::{Deterministic, EgConfig, LagPolicy, Significance};
use bubblescope_core::series::parse_date_cell;
use bubblescope_core::MonthStamp;
use serde::Serialize;

use crate::error::CliError;

pub const SEED_ENV: &str = "BUBBLESCOPE_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub fundamentals: Option<PathBuf>,
    pub columns: Option<Vec<String>>,
    pub t2: MonthStamp,
    pub t1_start: MonthStamp,
    pub t1_end: MonthStamp,
    pub fit: FitConfig,
    pub preset: Preset,
    pub eg_level: Significance,
    pub eg_trend: Deterministic,
    pub out: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let month = |y, m| MonthStamp::new(y, m).expect("valid month");
        Self {
            input: None,
            fundamentals: None,
            columns: None,
            t2: month(2017, 5),
            t1_start: month(2008, 1),
            t1_end: month(2010, 10),
            fit: FitConfig::default(),
            preset: Preset::PaperConsistent,
            eg_level: Significance::Five,
            eg_trend: Deterministic::ConstantTrend,
            out: PathBuf::from("out"),
            formats: vec![Format::Csv, Format::Json],
        }
    }
}

fn invalid(key: &str, value: &str, why: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("invalid value {value:?} for {key}: {why}"))
}

fn month(key: &str, value: &str) -> Result<MonthStamp, CliError> {
    parse_date_cell(value).map_err(|e| invalid(key, value, e))
}

fn list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

impl RunConfig {
    /// Sets one key from its textual value.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let value = value.trim();
        match key {
            "input" => self.input = Some(PathBuf::from(value)),
            "fundamentals" => self.fundamentals = Some(PathBuf::from(value)),
            "columns" => self.columns = Some(list(value)),
            "t2" => self.t2 = month(key, value)?,
            "t1_start" => self.t1_start = month(key, value)?,
            "t1_end" => self.t1_end = month(key, value)?,
            "n_starts" => {
                self.fit.n_starts = value.parse().map_err(|e| invalid(key, value, e))?;
            }
            "seed" => {
                self.fit.rng_seed = value.parse().map_err(|e| invalid(key, value, e))?;
            }
            "preset" => self.preset = value.parse().map_err(|e| invalid(key, value, e))?,
            "eg_level" => {
                let alpha: f64 = value.parse().map_err(|e| invalid(key, value, e))?;
                self.eg_level = Significance::from_alpha(alpha)
                    .ok_or_else(|| invalid(key, value, "expected 0.01, 0.05 or 0.10"))?;
            }
            "eg_trend" => {
                self.eg_trend = match value {
                    "n" => Deterministic::None,
                    "c" => Deterministic::Constant,
                    "ct" => Deterministic::ConstantTrend,
                    _ => return Err(invalid(key, value, "expected n, c or ct")),
                }
            }
            "out" => self.out = PathBuf::from(value),
            "format" => {
                let mut formats = Vec::new();
                for f in list(value) {
                    let f = match f.as_str() {
                        "csv" => Format::Csv,
                        "json" => Format::Json,
                        _ => return Err(invalid(key, &f, "expected csv or json")),
                    };
                    if !formats.contains(&f) {
                        formats.push(f);
                    }
                }
                if formats.is_empty() {
                    return Err(invalid(key, value, "no format given"));
                }
                self.formats = formats;
            }
            other => {
                return Err(CliError::Validation(format!(
                    "unknown config key {other:?}"
                )))
            }
        }
        Ok(())
    }

    /// Applies a config file body. Blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), CliError> {
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Validation(format!("{origin}:{}: expected key = value", i + 1))
            })?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(CliError::Validation(format!(
                    "{origin}:{}: duplicate key {key:?}",
                    i + 1
                )));
            }
            self.apply(key, value)
                .map_err(|e| e.context(&format!("{origin}:{}", i + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        self.apply_text(&text, &path.display().to_string())
    }

    /// Defaults, then `file`, then the seed variable, then `flags`.
    pub fn resolve(
        file: Option<&Path>,
        env_seed: Option<&str>,
        flags: &[(&str, Option<String>)],
    ) -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = file {
            cfg.apply_file(path)?;
        }
        if let Some(seed) = env_seed {
            cfg.apply("seed", seed).map_err(|e| e.context(SEED_ENV))?;
        }
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.apply(key, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.t1_start <= self.t1_end && self.t1_end < self.t2) {
            return Err(CliError::Validation(format!(
                "window range needs t1_start <= t1_end < t2, got {} / {} / {}",
                self.t1_start, self.t1_end, self.t2
            )));
        }
        self.fit.validate()?;
        Ok(())
    }

    pub fn thresholds(&self) -> FilterThresholds {
        self.preset.thresholds()
    }

    pub fn eg(&self) -> EgConfig {
        EgConfig {
            trend: self.eg_trend,
            lags: LagPolicy::default(),
            level: self.eg_level,
        }
    }

    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }

    pub fn require_input(&self) -> Result<&Path, CliError> {
        self.input.as_deref().ok_or_else(|| {
            CliError::Validation("no price input given (--input or input = ...)".into())
        })
    }
}
