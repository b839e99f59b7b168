//! Least squares, unit-root testing and the pairwise Engle-Granger
//! procedure behind the fundamental-bubble decision rule.

mod adf;
mod coint;
mod mackinnon;
mod ols;

pub use adf::{adf_test, schwert_max_lag, AdfResult, LagPolicy};
pub use coint::{
    engle_granger, engle_granger_series, fundamental_bubble_test, integration_order,
    CointegrationResult, DecisionBranch, EgConfig, EgResult, IntegrationOrder,
};
pub use mackinnon::{mackinnon_crit, mackinnon_p};
pub use ols::{ols, Design, OlsResult};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegressionError {
    #[error("need at least {needed} observations, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("series has zero variance")]
    ZeroVariance,
    #[error("degenerate regression: {0}")]
    Degenerate(String),
    #[error("series appears integrated of order two or higher")]
    OrderAtLeastTwo,
    #[error("series spans differ: {0}")]
    SpanMismatch(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Deterministic terms in a unit-root or cointegrating regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Deterministic {
    None,
    Constant,
    ConstantTrend,
}

impl Deterministic {
    pub fn has_constant(self) -> bool {
        !matches!(self, Deterministic::None)
    }

    pub fn has_trend(self) -> bool {
        matches!(self, Deterministic::ConstantTrend)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Significance {
    One,
    Five,
    Ten,
}

impl Significance {
    pub const ALL: [Significance; 3] = [Significance::One, Significance::Five, Significance::Ten];

    pub fn alpha(self) -> f64 {
        match self {
            Significance::One => 0.01,
            Significance::Five => 0.05,
            Significance::Ten => 0.10,
        }
    }

    pub fn from_alpha(alpha: f64) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|s| (s.alpha() - alpha).abs() < 1e-12)
    }
}

/// Star markers for a p-value: one at 10%, two at 5%, three at 1%.
pub fn stars(p_value: f64) -> &'static str {
    if p_value < 0.01 {
        "***"
    } else if p_value < 0.05 {
        "**"
    } else if p_value < 0.10 {
        "*"
    } else {
        ""
    }
}
