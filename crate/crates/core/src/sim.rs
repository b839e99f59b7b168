//! Synthetic price paths from the JLS jump-diffusion
//!
//! ```text
//! dp / p = mu(t) dt + sigma dW - kappa dj,    mu(t) = kappa h(t)
//! ```
//!
//! where `j` jumps from 0 to 1 at most once, with hazard rate `h`. Time is
//! measured in months from the first observation; `hp.tc` uses the same
//! origin.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lppls::{HazardParams, LpplsParams, ModelError};
use crate::series::{MonthStamp, PriceSeries, SeriesError};

/// Largest share of Euler steps allowed to have `h dt > 1`.
pub const MAX_CAPPED_SHARE: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("step too coarse: crash probability capped on {capped} of {steps} steps")]
    StepTooCoarse { capped: usize, steps: usize },
    #[error("t = {t} is outside [0, tc = {tc})")]
    OutsideBubble { t: f64, tc: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub hp: HazardParams,
    /// Diffusion per square-root month.
    pub sigma: f64,
    pub p0: f64,
    /// Months simulated; `horizon + 1` prices are emitted.
    pub horizon: usize,
    /// Euler step in months; must divide one month evenly.
    pub step: f64,
    pub rng_seed: u64,
    pub start: MonthStamp,
    /// Suppress crashes, giving the path conditional on survival.
    pub condition_on_survival: bool,
}

impl SimConfig {
    pub fn steps_per_month(&self) -> Result<usize, SimError> {
        if !(self.step > 0.0 && self.step <= 1.0) {
            return Err(SimError::Config(format!(
                "step {} must lie in (0, 1]",
                self.step
            )));
        }
        let k = (1.0 / self.step).round();
        if ((1.0 / self.step) - k).abs() > 1e-9 * k {
            return Err(SimError::Config(format!(
                "step {} does not divide one month",
                self.step
            )));
        }
        Ok(k as usize)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.hp.validate_shape()?;
        if !(0.0..1.0).contains(&self.hp.kappa) {
            return Err(SimError::Config(format!(
                "kappa {} outside [0, 1)",
                self.hp.kappa
            )));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(SimError::Config(
                "sigma must be finite and non-negative".into(),
            ));
        }
        if !(self.p0 > 0.0 && self.p0.is_finite()) {
            return Err(SimError::Config("p0 must be positive".into()));
        }
        if !(self.hp.tc > 0.0) {
            return Err(SimError::Config(
                "critical time must follow the start".into(),
            ));
        }
        if self.horizon == 0 {
            return Err(SimError::Config(
                "horizon must be at least one month".into(),
            ));
        }
        let per = self.steps_per_month()?;
        let steps = per * self.horizon;
        let dt = 1.0 / per as f64;
        let capped = (0..steps)
            .filter(|&k| self.step_hazard(k as f64 * dt) * dt > 1.0)
            .count();
        if capped as f64 > MAX_CAPPED_SHARE * steps as f64 {
            return Err(SimError::StepTooCoarse { capped, steps });
        }
        Ok(())
    }

    /// Hazard used by the scheme: zero from `tc` on.
    fn step_hazard(&self, t: f64) -> f64 {
        if t >= self.hp.tc {
            0.0
        } else {
            crate::lppls::hazard_rate(t, &self.hp).unwrap_or(0.0)
        }
    }

    /// LPPLS parameters of the survival log-price, on the absolute month
    /// axis anchored at `start`.
    pub fn implied_lppls(&self) -> LpplsParams {
        let hp = &self.hp;
        let big_a = self.p0.ln() + hp.kappa * drift_antiderivative(hp.tc, hp);
        let (b, c) = crate::lppls::coefficient_identities(hp).unwrap_or((0.0, 0.0));
        LpplsParams::new(
            self.start.as_months() + hp.tc,
            hp.m,
            hp.omega,
            hp.log_price_phase(),
            big_a,
            b,
            c,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimPath {
    pub prices: PriceSeries,
    /// Month containing the crash, if one occurred.
    pub crash_time: Option<MonthStamp>,
    /// Crash instant in months from the start.
    pub crash_at: Option<f64>,
    /// Drift `mu(t)` at each emitted month.
    pub drift_trace: Vec<f64>,
}

/// `alpha [tau^m / m + beta tau^m cos(omega ln tau - phi' - psi) / sqrt(m^2 + omega^2)]`
/// with `psi = atan2(omega, m)`; its decrease from `tc` to `tc - t` is the
/// integral of `h` over `[0, t]`.
fn drift_antiderivative(tau: f64, hp: &HazardParams) -> f64 {
    if tau == 0.0 {
        return 0.0;
    }
    let tm = tau.powf(hp.m);
    let psi = hp.omega.atan2(hp.m);
    hp.alpha
        * (tm / hp.m
            + hp.beta * tm * (hp.omega * tau.ln() - hp.phi_prime - psi).cos()
                / hp.m.hypot(hp.omega))
}

/// Integral of the hazard rate over `[0, t]`, for `0 <= t <= tc`.
pub fn integrated_hazard(t: f64, hp: &HazardParams) -> Result<f64, SimError> {
    if !(0.0..=hp.tc).contains(&t) {
        return Err(SimError::OutsideBubble { t, tc: hp.tc });
    }
    Ok(drift_antiderivative(hp.tc, hp) - drift_antiderivative(hp.tc - t, hp))
}

/// Expected log-price at `t` given no crash so far:
/// `ln p0 + kappa * integral of h - sigma^2 t / 2`.
pub fn survival_log_price(t: f64, config: &SimConfig) -> Result<f64, SimError> {
    let hp = &config.hp;
    if !(t >= 0.0 && t < hp.tc) {
        return Err(SimError::OutsideBubble { t, tc: hp.tc });
    }
    Ok(config.p0.ln() + hp.kappa * integrated_hazard(t, hp)? - 0.5 * config.sigma.powi(2) * t)
}

/// Euler-Maruyama on the log-price with a per-step crash probability
/// `min(h dt, 1)`. After a crash, or from `tc` on, drift and hazard vanish.
pub fn simulate(config: &SimConfig) -> Result<SimPath, SimError> {
    config.validate()?;
    let per = config.steps_per_month()?;
    let dt = 1.0 / per as f64;
    let sdt = dt.sqrt();
    let kappa = config.hp.kappa;
    let crash_jump = (1.0 - kappa).ln();
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);

    let mut logp = config.p0.ln();
    let mut log_path = Vec::with_capacity(config.horizon + 1);
    let mut drift_trace = Vec::with_capacity(config.horizon + 1);
    let mut crash_at: Option<f64> = None;
    log_path.push(logp);
    drift_trace.push(kappa * config.step_hazard(0.0));

    for month in 0..config.horizon {
        for sub in 0..per {
            let t = month as f64 + sub as f64 * dt;
            let z: f64 = rng.sample(StandardNormal);
            let u: f64 = rng.gen();
            let h = if crash_at.is_some() {
                0.0
            } else {
                config.step_hazard(t)
            };
            logp += (kappa * h - 0.5 * config.sigma * config.sigma) * dt + config.sigma * sdt * z;
            if !config.condition_on_survival && crash_at.is_none() && u < (h * dt).min(1.0) {
                logp += crash_jump;
                crash_at = Some(t + dt);
            }
        }
        let t = (month + 1) as f64;
        log_path.push(logp);
        let h = if crash_at.is_some() {
            0.0
        } else {
            config.step_hazard(t)
        };
        drift_trace.push(kappa * h);
    }

    let prices = PriceSeries::from_log(config.start, &log_path)?;
    let crash_time = crash_at.map(|s| config.start.add_months((s - 1e-9).floor().max(0.0) as i64));
    Ok(SimPath {
        prices,
        crash_time,
        crash_at,
        drift_trace,
    })
}

/// One path per seed, in seed order.
pub fn simulate_batch(config: &SimConfig, seeds: &[u64]) -> Result<Vec<SimPath>, SimError> {
    config.validate()?;
    seeds
        .par_iter()
        .map(|&s| {
            simulate(&SimConfig {
                rng_seed: s,
                ..*config
            })
        })
        .collect()
}
