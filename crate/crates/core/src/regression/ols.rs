use nalgebra::{DMatrix, DVector};

use super::RegressionError;

/// Reciprocal condition bound beyond which the design is treated as
/// rank-deficient.
const RANK_TOL: f64 = 1e-12;

/// Columns of a least-squares design, in order: intercept, linear trend
/// `t = 1..n`, then the supplied regressors.
#[derive(Debug, Clone, Default)]
pub struct Design<'a> {
    pub intercept: bool,
    pub trend: bool,
    pub regressors: Vec<&'a [f64]>,
}

impl<'a> Design<'a> {
    pub fn intercept_only() -> Self {
        Self {
            intercept: true,
            ..Default::default()
        }
    }

    pub fn with_regressor(mut self, x: &'a [f64]) -> Self {
        self.regressors.push(x);
        self
    }

    pub fn n_params(&self) -> usize {
        self.intercept as usize + self.trend as usize + self.regressors.len()
    }

    fn matrix(&self, n: usize) -> DMatrix<f64> {
        let k = self.n_params();
        DMatrix::from_fn(n, k, |i, j| {
            let mut j = j;
            if self.intercept {
                if j == 0 {
                    return 1.0;
                }
                j -= 1;
            }
            if self.trend {
                if j == 0 {
                    return (i + 1) as f64;
                }
                j -= 1;
            }
            self.regressors[j][i]
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OlsResult {
    /// Coefficients in design-column order.
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub residuals: Vec<f64>,
    pub sse: f64,
    pub n_obs: usize,
    intercept: bool,
    trend: bool,
}

impl OlsResult {
    pub fn intercept(&self) -> Option<f64> {
        self.intercept.then(|| self.coefficients[0])
    }

    pub fn trend(&self) -> Option<f64> {
        self.trend
            .then(|| self.coefficients[self.intercept as usize])
    }

    /// Coefficient on the `i`-th supplied regressor.
    pub fn slope(&self, i: usize) -> f64 {
        self.coefficients[self.intercept as usize + self.trend as usize + i]
    }

    pub fn slope_se(&self, i: usize) -> f64 {
        self.std_errors[self.intercept as usize + self.trend as usize + i]
    }

    pub fn df_resid(&self) -> usize {
        self.n_obs - self.coefficients.len()
    }
}

/// Ordinary least squares via Householder QR.
pub fn ols(y: &[f64], design: &Design<'_>) -> Result<OlsResult, RegressionError> {
    let n = y.len();
    let k = design.n_params();
    if k == 0 {
        return Err(RegressionError::InvalidInput("empty design".into()));
    }
    if n < k + 2 {
        return Err(RegressionError::TooShort {
            needed: k + 2,
            got: n,
        });
    }
    if let Some(bad) = design.regressors.iter().position(|r| r.len() != n) {
        return Err(RegressionError::InvalidInput(format!(
            "regressor {bad} has {} observations, expected {n}",
            design.regressors[bad].len()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(RegressionError::InvalidInput(
            "non-finite observation".into(),
        ));
    }

    let x = design.matrix(n);
    // Scale columns to unit norm so the rank test is independent of units.
    let norms: Vec<f64> = x.column_iter().map(|c| c.norm()).collect();
    if norms.iter().any(|&c| c == 0.0 || !c.is_finite()) {
        return Err(RegressionError::RankDeficient);
    }
    let mut xs = x.clone();
    for (j, mut col) in xs.column_iter_mut().enumerate() {
        col /= norms[j];
    }
    let qr = xs.qr();
    let r = qr.r();
    let diag_max = r.diagonal().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if r.diagonal().iter().any(|d| d.abs() <= RANK_TOL * diag_max) {
        return Err(RegressionError::RankDeficient);
    }
    let yv = DVector::from_column_slice(y);
    let qty = qr.q().transpose() * &yv;
    let scaled = r
        .solve_upper_triangular(&qty)
        .ok_or(RegressionError::RankDeficient)?;
    let coefficients: Vec<f64> = scaled.iter().zip(&norms).map(|(b, s)| b / s).collect();
    let fitted = &x * DVector::from_column_slice(&coefficients);
    let residuals: Vec<f64> = (&yv - fitted).iter().copied().collect();
    let sse: f64 = residuals.iter().map(|e| e * e).sum();

    let sigma2 = sse / (n - k) as f64;
    let r_inv = r.try_inverse().ok_or(RegressionError::RankDeficient)?;
    let std_errors = (0..k)
        .map(|j| {
            let row_norm2: f64 = r_inv.row(j).iter().map(|v| v * v).sum();
            (sigma2 * row_norm2).sqrt() / norms[j]
        })
        .collect();

    Ok(OlsResult {
        coefficients,
        std_errors,
        residuals,
        sse,
        n_obs: n,
        intercept: design.intercept,
        trend: design.trend,
    })
}
