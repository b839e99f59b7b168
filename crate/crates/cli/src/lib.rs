//! Command-line front end: ingestion, configuration, both diagnostic
//! pipelines and report emission.

pub mod coint;
pub mod config;
pub mod error;
pub mod fixtures;
pub mod output;
pub mod scan;
pub mod simulate;
pub mod summary;

use std::path::PathBuf;

use bubblescope_core::reference::TcConvention;
use bubblescope_core::sim::SimConfig;
use bubblescope_core::MonthStamp;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{RunConfig, SEED_ENV};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "bubblescope",
    version,
    about = "Bubble diagnostics for monthly price series"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rolling-window LPPLS scan with strength summary.
    Scan(CommonArgs),
    /// ADF pre-tests and Engle-Granger against each fundamental.
    Coint(CommonArgs),
    /// Combine scan and coint outputs into per-series verdicts.
    Summary(CommonArgs),
    /// Simulate JLS bubble paths as a price CSV.
    Simulate(SimulateArgs),
    /// Re-qualify published LPPLS tables.
    QualifyFixtures(FixtureArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PresetArg {
    PaperConsistent,
    Strict,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Price CSV: a month column, then one column per series.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Fundamentals CSV with `Series.Factor` columns.
    #[arg(long)]
    pub fundamentals: Option<PathBuf>,
    /// Flat `key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub t2: Option<String>,
    #[arg(long)]
    pub t1_start: Option<String>,
    #[arg(long)]
    pub t1_end: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n_starts: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Repeatable; defaults to both.
    #[arg(long, value_enum)]
    pub format: Vec<FormatArg>,
    #[arg(long, value_enum)]
    pub preset: Option<PresetArg>,
}

impl CommonArgs {
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        let formats = (!self.format.is_empty()).then(|| {
            self.format
                .iter()
                .map(|f| match f {
                    FormatArg::Csv => "csv",
                    FormatArg::Json => "json",
                })
                .collect::<Vec<_>>()
                .join(",")
        });
        let preset = self.preset.map(|p| {
            match p {
                PresetArg::PaperConsistent => "paper-consistent",
                PresetArg::Strict => "strict",
            }
            .to_string()
        });
        let env_seed = std::env::var(SEED_ENV).ok();
        RunConfig::resolve(
            self.config.as_deref(),
            env_seed.as_deref(),
            &[
                ("input", path(&self.input)),
                ("fundamentals", path(&self.fundamentals)),
                ("t2", self.t2.clone()),
                ("t1_start", self.t1_start.clone()),
                ("t1_end", self.t1_end.clone()),
                ("seed", self.seed.map(|s| s.to_string())),
                ("n_starts", self.n_starts.map(|s| s.to_string())),
                ("out", path(&self.out)),
                ("format", formats),
                ("preset", preset),
            ],
        )
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = simulate::default_hazard().alpha)]
    pub alpha: f64,
    #[arg(long, default_value_t = simulate::default_hazard().beta)]
    pub beta: f64,
    #[arg(long, default_value_t = simulate::default_hazard().m)]
    pub m: f64,
    #[arg(long, default_value_t = simulate::default_hazard().omega)]
    pub omega: f64,
    /// Critical time in months after the first observation.
    #[arg(long, default_value_t = simulate::default_hazard().tc)]
    pub tc: f64,
    #[arg(long, default_value_t = simulate::default_hazard().phi_prime)]
    pub phi: f64,
    #[arg(long, default_value_t = simulate::default_hazard().kappa)]
    pub kappa: f64,
    /// Diffusion per square-root month.
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 100.0)]
    pub p0: f64,
    #[arg(long, default_value_t = 112)]
    pub horizon: usize,
    /// Euler sub-steps per month.
    #[arg(long, default_value_t = 64)]
    pub substeps: u32,
    #[arg(long, default_value = "200801")]
    pub start: String,
    #[arg(long, default_value_t = 1)]
    pub paths: usize,
    /// Suppress crashes.
    #[arg(long)]
    pub survival: bool,
}

impl SimulateArgs {
    pub fn sim_config(&self, seed: u64) -> Result<SimConfig, CliError> {
        let start: MonthStamp = self
            .start
            .parse()
            .map_err(|e| CliError::Validation(format!("--start: {e}")))?;
        if self.substeps == 0 {
            return Err(CliError::Validation("--substeps must be positive".into()));
        }
        let cfg = SimConfig {
            hp: bubblescope_core::lppls::HazardParams {
                alpha: self.alpha,
                beta: self.beta,
                m: self.m,
                omega: self.omega,
                tc: self.tc,
                phi_prime: self.phi,
                kappa: self.kappa,
            },
            sigma: self.sigma,
            p0: self.p0,
            horizon: self.horizon,
            step: 1.0 / self.substeps as f64,
            rng_seed: seed,
            start,
            condition_on_survival: self.survival,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConventionArg {
    MonthStart,
    MidMonth,
}

#[derive(Debug, Clone, Args)]
pub struct FixtureArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Where inside its month a published critical time is placed.
    #[arg(long, value_enum, default_value = "mid-month")]
    pub tc_convention: ConventionArg,
}

/// Runs one subcommand and returns the files it wrote.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let out = match &cli.command {
        Command::Scan(a) => scan::run_scan(&a.resolve()?)?.1,
        Command::Coint(a) => coint::run_coint(&a.resolve()?)?.1,
        Command::Summary(a) => summary::run_summary(&a.resolve()?)?.1,
        Command::Simulate(a) => {
            let cfg = a.common.resolve()?;
            let sim = a.sim_config(cfg.fit.rng_seed)?;
            simulate::run_simulate(&cfg, sim, a.paths)?.1
        }
        Command::QualifyFixtures(a) => {
            let conv = match a.tc_convention {
                ConventionArg::MonthStart => TcConvention::MonthStart,
                ConventionArg::MidMonth => TcConvention::MidMonth,
            };
            fixtures::run_fixtures(&a.common.resolve()?, conv)?.1
        }
    };
    out.commit()
}
