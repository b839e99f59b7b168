use serde::{Deserialize, Serialize};

use super::mackinnon::{mackinnon_crit, mackinnon_p};
use super::ols::{ols, Design};
use super::{Deterministic, RegressionError, Significance};

/// Minimum usable observations beyond the largest lag.
const MIN_OBS_BEYOND_LAG: usize = 20;

/// How many lagged differences enter the ADF regression.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LagPolicy {
    Fixed(usize),
    /// Minimise AIC over `0..=max_lag` on a common sample; `None` uses the
    /// Schwert bound `floor(12 (T/100)^(1/4))`.
    Aic {
        max_lag: Option<usize>,
    },
}

impl Default for LagPolicy {
    fn default() -> Self {
        LagPolicy::Aic { max_lag: None }
    }
}

pub fn schwert_max_lag(n: usize) -> usize {
    (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdfResult {
    pub statistic: f64,
    pub p_value: f64,
    pub lags_used: usize,
    pub n_obs: usize,
    pub deterministic: Deterministic,
    /// 1%, 5%, 10% critical values for this sample size, when tabulated.
    pub critical_values: Option<[f64; 3]>,
}

impl AdfResult {
    pub fn rejects(&self, level: Significance) -> bool {
        self.p_value < level.alpha()
    }
}

/// Augmented Dickey-Fuller test of a unit root in `y`.
pub fn adf_test(
    y: &[f64],
    det: Deterministic,
    lags: LagPolicy,
) -> Result<AdfResult, RegressionError> {
    adf_with_surface(y, det, lags, 1, det)
}

/// ADF machinery with an explicit p-value surface: `(n_series, surface)`
/// selects the MacKinnon table, which for cointegration residuals differs
/// from the regression's own deterministic terms.
pub(crate) fn adf_with_surface(
    y: &[f64],
    det: Deterministic,
    lags: LagPolicy,
    n_series: usize,
    surface: Deterministic,
) -> Result<AdfResult, RegressionError> {
    if y.iter().any(|v| !v.is_finite()) {
        return Err(RegressionError::InvalidInput(
            "non-finite observation".into(),
        ));
    }
    let n = y.len();
    let max_lag = match lags {
        LagPolicy::Fixed(p) => p,
        LagPolicy::Aic { max_lag: Some(p) } => p,
        LagPolicy::Aic { max_lag: None } => schwert_max_lag(n),
    };
    if n < MIN_OBS_BEYOND_LAG + max_lag {
        return Err(RegressionError::TooShort {
            needed: MIN_OBS_BEYOND_LAG + max_lag,
            got: n,
        });
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    if y.iter().all(|v| *v == y[0]) || y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() == 0.0 {
        return Err(RegressionError::ZeroVariance);
    }

    let dy: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();

    let lags_used = match lags {
        LagPolicy::Fixed(p) => p,
        LagPolicy::Aic { .. } => {
            let mut best = (f64::INFINITY, 0);
            for p in 0..=max_lag {
                let fit = adf_regression(y, &dy, det, p, max_lag)?;
                let nobs = fit.n_obs as f64;
                let k = fit.coefficients.len() as f64;
                let aic = nobs * (fit.sse / nobs).ln() + 2.0 * k;
                if aic < best.0 {
                    best = (aic, p);
                }
            }
            best.1
        }
    };

    let fit = adf_regression(y, &dy, det, lags_used, lags_used)?;
    let gamma_idx = 0;
    let se = fit.slope_se(gamma_idx);
    if !(se > 0.0 && se.is_finite()) {
        return Err(RegressionError::Degenerate(
            "zero residual variance in ADF regression".into(),
        ));
    }
    let statistic = fit.slope(gamma_idx) / se;
    Ok(AdfResult {
        statistic,
        p_value: mackinnon_p(statistic, surface, n_series),
        lags_used,
        n_obs: fit.n_obs,
        deterministic: det,
        critical_values: mackinnon_crit(surface, n_series, fit.n_obs),
    })
}

/// Regresses `dy[t]` on `y[t]` (the lagged level) and `dy[t-1..t-p]`,
/// starting at `dy` index `start` so that different `p` share a sample.
fn adf_regression(
    y: &[f64],
    dy: &[f64],
    det: Deterministic,
    p: usize,
    start: usize,
) -> Result<super::ols::OlsResult, RegressionError> {
    let m = dy.len();
    let target = &dy[start..];
    let level = &y[start..m];
    let lagged: Vec<&[f64]> = (1..=p).map(|i| &dy[start - i..m - i]).collect();
    let mut design = Design {
        intercept: det.has_constant(),
        trend: det.has_trend(),
        regressors: vec![level],
    };
    design.regressors.extend(lagged);
    ols(target, &design)
}
