use serde::{Deserialize, Serialize};

use super::adf::{adf_test, adf_with_surface, AdfResult, LagPolicy};
use super::ols::{ols, Design};
use super::{Deterministic, RegressionError, Significance};
use crate::series::PriceSeries;

/// Step-1 residuals whose RMS falls below this fraction of the dependent
/// series' standard deviation are treated as an exact linear relation.
const DEGENERATE_RESIDUAL_RATIO: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgConfig {
    /// Deterministic terms of the cointegrating regression (step 1) and of
    /// the level/difference ADF pre-tests.
    pub trend: Deterministic,
    pub lags: LagPolicy,
    pub level: Significance,
}

impl Default for EgConfig {
    fn default() -> Self {
        Self {
            trend: Deterministic::ConstantTrend,
            lags: LagPolicy::default(),
            level: Significance::Five,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IntegrationOrder {
    I0,
    I1,
}

/// `I(0)` if the level test rejects, `I(1)` if only the differenced test
/// rejects, otherwise an error.
pub fn integration_order(
    y: &[f64],
    det: Deterministic,
    lags: LagPolicy,
    level: Significance,
) -> Result<IntegrationOrder, RegressionError> {
    if adf_test(y, det, lags)?.rejects(level) {
        return Ok(IntegrationOrder::I0);
    }
    let dy: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
    if adf_test(&dy, det, lags)?.rejects(level) {
        Ok(IntegrationOrder::I1)
    } else {
        Err(RegressionError::OrderAtLeastTwo)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgResult {
    pub statistic: f64,
    pub p_value: f64,
    pub intercept: f64,
    pub trend: Option<f64>,
    pub slope: f64,
    /// Step-1 residuals.
    pub residuals: Vec<f64>,
    /// Set when `y` is an exact linear function of `x` (and trend).
    pub degenerate: bool,
    pub residual_adf: Option<AdfResult>,
}

impl EgResult {
    pub fn cointegrated_at(&self, level: Significance) -> bool {
        self.p_value < level.alpha()
    }
}

/// Two-step Engle-Granger test: OLS of `y` on `{1, t, x}` (per
/// `cfg.trend`), then an ADF regression without deterministic terms on the
/// residuals, evaluated on the two-variable cointegration surface.
pub fn engle_granger(y: &[f64], x: &[f64], cfg: &EgConfig) -> Result<EgResult, RegressionError> {
    if y.len() != x.len() {
        return Err(RegressionError::SpanMismatch(format!(
            "{} vs {} observations",
            y.len(),
            x.len()
        )));
    }
    if cfg.trend == Deterministic::None {
        return Err(RegressionError::InvalidInput(
            "cointegrating regression needs at least a constant".into(),
        ));
    }
    let design = Design {
        intercept: true,
        trend: cfg.trend.has_trend(),
        regressors: vec![x],
    };
    let step1 = ols(y, &design)?;

    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let rms = (step1.sse / n).sqrt();
    let degenerate = sd == 0.0 || rms <= DEGENERATE_RESIDUAL_RATIO * sd;

    let (statistic, p_value, residual_adf) = if degenerate {
        (f64::NEG_INFINITY, 0.0, None)
    } else {
        let r = adf_with_surface(
            &step1.residuals,
            Deterministic::None,
            cfg.lags,
            2,
            cfg.trend,
        )?;
        (r.statistic, r.p_value, Some(r))
    };
    Ok(EgResult {
        statistic,
        p_value,
        intercept: step1.intercept().expect("intercept in design"),
        trend: step1.trend(),
        slope: step1.slope(0),
        residuals: step1.residuals,
        degenerate,
        residual_adf,
    })
}

pub fn engle_granger_series(
    y: &PriceSeries,
    x: &PriceSeries,
    cfg: &EgConfig,
) -> Result<EgResult, RegressionError> {
    check_spans(y, x)?;
    engle_granger(y.values(), x.values(), cfg)
}

fn check_spans(y: &PriceSeries, x: &PriceSeries) -> Result<(), RegressionError> {
    if y.start() != x.start() || y.len() != x.len() {
        return Err(RegressionError::SpanMismatch(format!(
            "{}..{} vs {}..{}",
            y.start(),
            y.end(),
            x.start(),
            x.end()
        )));
    }
    Ok(())
}

/// Which branch of the fundamental-bubble rule produced the verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionBranch {
    /// Price is I(0): self-correcting, no bubble, pair excluded.
    PriceStationary,
    /// Price is I(1) while the fundamental is I(0).
    FundamentalStationary,
    NotCointegrated,
    Cointegrated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CointegrationResult {
    pub price_order: IntegrationOrder,
    /// Not evaluated when the price is already I(0).
    pub fundamental_order: Option<IntegrationOrder>,
    pub eg_statistic: Option<f64>,
    pub eg_p_value: Option<f64>,
    pub cointegrated_at: Vec<Significance>,
    pub degenerate: bool,
    pub branch: DecisionBranch,
    pub bubble_flag: bool,
}

/// Fundamental-bubble rule: a bubble exists when the price is not I(0) and
/// either the fundamental is I(0) or the two I(1) series fail to
/// cointegrate at `cfg.level`.
pub fn fundamental_bubble_test(
    price: &[f64],
    fundamental: &[f64],
    cfg: &EgConfig,
) -> Result<CointegrationResult, RegressionError> {
    if price.len() != fundamental.len() {
        return Err(RegressionError::SpanMismatch(format!(
            "{} vs {} observations",
            price.len(),
            fundamental.len()
        )));
    }
    let price_order = integration_order(price, cfg.trend, cfg.lags, Significance::Five)?;
    if price_order == IntegrationOrder::I0 {
        return Ok(CointegrationResult {
            price_order,
            fundamental_order: None,
            eg_statistic: None,
            eg_p_value: None,
            cointegrated_at: Vec::new(),
            degenerate: false,
            branch: DecisionBranch::PriceStationary,
            bubble_flag: false,
        });
    }
    let fundamental_order =
        integration_order(fundamental, cfg.trend, cfg.lags, Significance::Five)?;
    if fundamental_order == IntegrationOrder::I0 {
        return Ok(CointegrationResult {
            price_order,
            fundamental_order: Some(fundamental_order),
            eg_statistic: None,
            eg_p_value: None,
            cointegrated_at: Vec::new(),
            degenerate: false,
            branch: DecisionBranch::FundamentalStationary,
            bubble_flag: true,
        });
    }
    let eg = engle_granger(price, fundamental, cfg)?;
    let cointegrated = eg.cointegrated_at(cfg.level);
    Ok(CointegrationResult {
        price_order,
        fundamental_order: Some(fundamental_order),
        eg_statistic: Some(eg.statistic),
        eg_p_value: Some(eg.p_value),
        cointegrated_at: Significance::ALL
            .into_iter()
            .filter(|s| eg.cointegrated_at(*s))
            .collect(),
        degenerate: eg.degenerate,
        branch: if cointegrated {
            DecisionBranch::Cointegrated
        } else {
            DecisionBranch::NotCointegrated
        },
        bubble_flag: !cointegrated,
    })
}
