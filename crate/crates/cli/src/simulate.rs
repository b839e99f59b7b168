use bubblescope_core::lppls::{HazardParams, LpplsParams};
use bubblescope_core::series::to_csv_string;
use bubblescope_core::sim::{simulate_batch, SimConfig};
use bubblescope_core::MonthStamp;
use serde::Serialize;

use crate::config::{Format, RunConfig};
use crate::error::CliError;
use crate::output::OutputSet;

pub const SIM_CSV: &str = "simulated.csv";
pub const SIM_JSON: &str = "simulated.json";

#[derive(Debug, Clone, Serialize)]
pub struct PathInfo {
    pub label: String,
    pub seed: u64,
    pub crash_month: Option<MonthStamp>,
    pub crash_at: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimReport {
    pub config: SimConfig,
    /// LPPLS parameters of the survival log-price on the month axis.
    pub implied: LpplsParams,
    pub paths: Vec<PathInfo>,
}

/// Simulates `n_paths` paths with seeds `seed, seed + 1, ...`, one CSV
/// column per path.
pub fn run_simulate(
    cfg: &RunConfig,
    sim: SimConfig,
    n_paths: usize,
) -> Result<(SimReport, OutputSet), CliError> {
    if n_paths == 0 {
        return Err(CliError::Validation("need at least one path".into()));
    }
    let seeds: Vec<u64> = (0..n_paths as u64)
        .map(|k| sim.rng_seed.wrapping_add(k))
        .collect();
    let paths = simulate_batch(&sim, &seeds)?;
    let labels: Vec<String> = seeds.iter().map(|s| format!("path{s}")).collect();
    let columns: Vec<(&str, &_)> = labels
        .iter()
        .map(String::as_str)
        .zip(paths.iter().map(|p| &p.prices))
        .collect();
    let csv = to_csv_string(&columns)?;
    let report = SimReport {
        config: sim,
        implied: sim.implied_lppls(),
        paths: labels
            .iter()
            .zip(&seeds)
            .zip(&paths)
            .map(|((l, &seed), p)| PathInfo {
                label: l.clone(),
                seed,
                crash_month: p.crash_time,
                crash_at: p.crash_at,
            })
            .collect(),
    };
    let mut out = OutputSet::default();
    out.add(cfg.out.join(SIM_CSV), csv);
    if cfg.wants(Format::Json) {
        out.add_json(cfg.out.join(SIM_JSON), &report)?;
    }
    Ok((report, out))
}

/// A strong bubble whose critical time falls six months after the default
/// scan end.
pub fn default_hazard() -> HazardParams {
    HazardParams {
        alpha: 0.1,
        beta: 0.5,
        m: 0.45,
        omega: 7.5,
        tc: 118.0,
        phi_prime: 0.4,
        kappa: 0.4,
    }
}
