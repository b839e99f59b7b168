//! The LPPLS expected log-price, its linear sub-problem, and the JLS hazard
//! rate that generates it.
//!
//! With `tau = t_c - t` the expected log-price is
//!
//! ```text
//! A + B tau^m + C tau^m cos(omega ln tau - phi)
//! ```
//!
//! and is linear in `(A, B, C1, C2)` once `(t_c, m, omega)` are fixed,
//! where `C1 = C cos phi` and `C2 = C sin phi`.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Condition number of the column-equilibrated design above which the
/// linear sub-problem is reported as degenerate.
pub const MAX_CONDITION: f64 = 1e12;

/// Observations required by [`profile_linear`].
pub const MIN_PROFILE_OBS: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("t = {t} lies beyond the critical time {tc}")]
    PastCriticalTime { t: f64, tc: f64 },
    #[error("exponent m = {0} must be positive")]
    NonPositiveExponent(f64),
    #[error("need at least {MIN_PROFILE_OBS} observations, got {0}")]
    TooFewObservations(usize),
    #[error("times and values differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("singular linear system")]
    Singular,
    #[error("invalid hazard parameters: {0}")]
    InvalidHazard(String),
}

/// A full LPPLS parameter set in canonical form (`c >= 0`,
/// `phi` in `[0, 2 pi)`). Times are in months.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpplsParams {
    pub tc: f64,
    pub m: f64,
    pub omega: f64,
    pub phi: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl LpplsParams {
    /// Builds canonical parameters; a negative `c` is folded into the phase.
    pub fn new(tc: f64, m: f64, omega: f64, phi: f64, a: f64, b: f64, c: f64) -> Self {
        let (c, phi) = if c < 0.0 { (-c, phi + PI) } else { (c, phi) };
        Self {
            tc,
            m,
            omega,
            phi: normalize_phase(phi),
            a,
            b,
            c,
        }
    }

    pub fn from_profile(tc: f64, m: f64, omega: f64, lin: &LinearProfile) -> Self {
        Self::new(tc, m, omega, lin.phi(), lin.a, lin.b, lin.c_amplitude())
    }

    pub fn c1(&self) -> f64 {
        self.c * self.phi.cos()
    }

    pub fn c2(&self) -> f64 {
        self.c * self.phi.sin()
    }

    /// `0 < m < 1` and `B < 0`.
    pub fn is_bubble_regime(&self) -> bool {
        self.m > 0.0 && self.m < 1.0 && self.b < 0.0
    }
}

pub fn normalize_phase(phi: f64) -> f64 {
    let p = phi.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if p >= TAU {
        0.0
    } else {
        p
    }
}

/// Expected log-price at month `t`. At `t == tc` the limit `A` is returned.
pub fn lppls_log_price(t: f64, p: &LpplsParams) -> Result<f64, ModelError> {
    let tau = p.tc - t;
    if tau < 0.0 {
        return Err(ModelError::PastCriticalTime { t, tc: p.tc });
    }
    if tau == 0.0 {
        if p.m <= 0.0 {
            return Err(ModelError::NonPositiveExponent(p.m));
        }
        return Ok(p.a);
    }
    let tm = tau.powf(p.m);
    Ok(p.a + p.b * tm + p.c * tm * (p.omega * tau.ln() - p.phi).cos())
}

/// Least-squares solution of the linear sub-problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearProfile {
    pub a: f64,
    pub b: f64,
    pub c1: f64,
    pub c2: f64,
    pub sse: f64,
    /// 2-norm condition number of the column-equilibrated design.
    pub condition: f64,
}

impl LinearProfile {
    pub fn c_amplitude(&self) -> f64 {
        self.c1.hypot(self.c2)
    }

    pub fn phi(&self) -> f64 {
        normalize_phase(self.c2.atan2(self.c1))
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.condition <= MAX_CONDITION)
    }
}

/// Basis columns `{1, tau^m, tau^m cos(omega ln tau), tau^m sin(omega ln tau)}`.
pub(crate) fn basis(times: &[f64], tc: f64, m: f64, omega: f64) -> DMatrix<f64> {
    let n = times.len();
    let mut x = DMatrix::zeros(n, 4);
    for (i, &t) in times.iter().enumerate() {
        let tau = tc - t;
        let lt = tau.ln();
        let tm = tau.powf(m);
        let (s, c) = (omega * lt).sin_cos();
        x[(i, 0)] = 1.0;
        x[(i, 1)] = tm;
        x[(i, 2)] = tm * c;
        x[(i, 3)] = tm * s;
    }
    x
}

/// QR factorisation of the equilibrated basis with the solved
/// coefficients; shared with the calibrator's sensitivity computation.
pub(crate) struct LinearSolve {
    pub x: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub col_norms: [f64; 4],
    pub coef: [f64; 4],
    pub residuals: DVector<f64>,
    pub sse: f64,
    pub condition: f64,
}

pub(crate) fn solve_linear(
    times: &[f64],
    y: &[f64],
    tc: f64,
    m: f64,
    omega: f64,
) -> Result<LinearSolve, ModelError> {
    if times.len() != y.len() {
        return Err(ModelError::LengthMismatch(times.len(), y.len()));
    }
    if times.len() < MIN_PROFILE_OBS {
        return Err(ModelError::TooFewObservations(times.len()));
    }
    let last = times.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(tc > last) {
        return Err(ModelError::PastCriticalTime { t: last, tc });
    }
    let x = basis(times, tc, m, omega);
    let mut xs = x.clone();
    let mut col_norms = [0.0; 4];
    for (j, mut col) in xs.column_iter_mut().enumerate() {
        let nrm = col.norm();
        if !(nrm > 0.0 && nrm.is_finite()) {
            return Err(ModelError::Singular);
        }
        col_norms[j] = nrm;
        col /= nrm;
    }
    let qr = xs.qr();
    let q = qr.q();
    let r = qr.r();
    let sv = r.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    if !(smin > 0.0) || !smax.is_finite() {
        return Err(ModelError::Singular);
    }
    let condition = smax / smin;
    let yv = DVector::from_column_slice(y);
    let qty = q.transpose() * &yv;
    let scaled = r.solve_upper_triangular(&qty).ok_or(ModelError::Singular)?;
    let mut coef = [0.0; 4];
    for j in 0..4 {
        coef[j] = scaled[j] / col_norms[j];
    }
    let fitted = &x * DVector::from_column_slice(&coef);
    let residuals = yv - fitted;
    let sse = residuals.norm_squared();
    Ok(LinearSolve {
        x,
        q,
        r,
        col_norms,
        coef,
        residuals,
        sse,
        condition,
    })
}

/// Solves for `(A, B, C1, C2)` minimising the squared error of `log_prices`
/// observed at month coordinates `times`, given `(tc, m, omega)`.
///
/// Requires `tc` strictly after the last observation. An ill-conditioned
/// system is reported through [`LinearProfile::is_degenerate`]; an exactly
/// singular one is an error.
pub fn profile_linear(
    times: &[f64],
    log_prices: &[f64],
    tc: f64,
    m: f64,
    omega: f64,
) -> Result<LinearProfile, ModelError> {
    let s = solve_linear(times, log_prices, tc, m, omega)?;
    Ok(LinearProfile {
        a: s.coef[0],
        b: s.coef[1],
        c1: s.coef[2],
        c2: s.coef[3],
        sse: s.sse,
        condition: s.condition,
    })
}

/// Parameters of the JLS crash hazard rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HazardParams {
    pub alpha: f64,
    pub beta: f64,
    pub m: f64,
    pub omega: f64,
    pub tc: f64,
    pub phi_prime: f64,
    /// Fraction of price lost in a crash.
    pub kappa: f64,
}

impl HazardParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        self.validate_shape()?;
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return Err(ModelError::InvalidHazard(format!(
                "kappa = {} outside (0, 1]",
                self.kappa
            )));
        }
        Ok(())
    }

    /// Everything except the crash size.
    pub(crate) fn validate_shape(&self) -> Result<(), ModelError> {
        let finite = [
            self.alpha,
            self.beta,
            self.m,
            self.omega,
            self.tc,
            self.phi_prime,
            self.kappa,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(ModelError::InvalidHazard("non-finite parameter".into()));
        }
        if !(self.alpha > 0.0) {
            return Err(ModelError::InvalidHazard(format!(
                "alpha = {} must be > 0",
                self.alpha
            )));
        }
        if !(self.beta.abs() < 1.0) {
            return Err(ModelError::InvalidHazard(format!(
                "|beta| = {} must be < 1",
                self.beta.abs()
            )));
        }
        if !(self.m > 0.0) {
            return Err(ModelError::NonPositiveExponent(self.m));
        }
        Ok(())
    }

    /// Phase of the log-price oscillation implied by integrating the drift:
    /// `phi = phi' + atan2(omega, m)`.
    pub fn log_price_phase(&self) -> f64 {
        normalize_phase(self.phi_prime + self.omega.atan2(self.m))
    }
}

/// `alpha tau^(m-1) (1 + beta cos(omega ln tau - phi'))` with `tau = tc - t`.
pub fn hazard_rate(t: f64, hp: &HazardParams) -> Result<f64, ModelError> {
    let tau = hp.tc - t;
    if !(tau > 0.0) {
        return Err(ModelError::PastCriticalTime { t, tc: hp.tc });
    }
    Ok(hp.alpha
        * tau.powf(hp.m - 1.0)
        * (1.0 + hp.beta * (hp.omega * tau.ln() - hp.phi_prime).cos()))
}

/// `(B, C) = (-kappa alpha / m, -kappa alpha beta / sqrt(m^2 + omega^2))`.
pub fn coefficient_identities(hp: &HazardParams) -> Result<(f64, f64), ModelError> {
    if hp.m == 0.0 {
        return Err(ModelError::NonPositiveExponent(hp.m));
    }
    let ka = hp.kappa * hp.alpha;
    Ok((-ka / hp.m, -ka * hp.beta / hp.m.hypot(hp.omega)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn shanghai_200801() -> LpplsParams {
        LpplsParams::new(0.0, 0.746, 4.245, 0.0, 10.883, -0.004, 0.001)
    }

    #[test]
    fn flat_model() {
        let p = LpplsParams::new(100.0, 0.5, 6.0, 1.0, 9.5, 0.0, 0.0);
        for t in [0.0, 50.0, 99.9, 100.0] {
            assert_eq!(lppls_log_price(t, &p).unwrap(), 9.5);
        }
    }

    #[test]
    fn critical_time_limit() {
        let p = LpplsParams::new(100.0, 0.5, 6.0, 1.0, 9.5, -3.0, 0.7);
        assert_eq!(lppls_log_price(100.0, &p).unwrap(), 9.5);
        assert!(matches!(
            lppls_log_price(100.5, &p),
            Err(ModelError::PastCriticalTime { .. })
        ));
        let q = LpplsParams { m: 0.0, ..p };
        assert!(matches!(
            lppls_log_price(100.0, &q),
            Err(ModelError::NonPositiveExponent(_))
        ));
    }

    #[test]
    fn shanghai_row_reference_value() {
        // Frozen from a 50-digit mpmath evaluation of the closed form at tau = 12.
        let expected = 10.854_705_142_037_852;
        let p = shanghai_200801();
        let v = lppls_log_price(-12.0, &p).unwrap();
        assert!(((v - expected) / expected).abs() < 1e-12, "{v}");
    }

    #[test]
    fn canonical_amplitude_and_phase() {
        let p = LpplsParams::new(10.0, 0.5, 7.0, 0.3, 1.0, -1.0, -0.2);
        assert!((p.c - 0.2).abs() < 1e-15);
        assert!((p.phi - (0.3 + PI)).abs() < 1e-15);
        let q = LpplsParams::new(10.0, 0.5, 7.0, -0.3, 1.0, -1.0, 0.2);
        assert!((q.phi - (TAU - 0.3)).abs() < 1e-15);
        // both forms describe the same curve
        let r = LpplsParams {
            c: -0.2,
            phi: 0.3,
            ..p
        };
        for t in [0.0, 3.0, 9.0] {
            let a = lppls_log_price(t, &p).unwrap();
            let b = lppls_log_price(t, &r).unwrap();
            assert!((a - b).abs() < 1e-14);
        }
    }

    fn synthetic(p: &LpplsParams, n: usize) -> (Vec<f64>, Vec<f64>) {
        let times: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let y = times
            .iter()
            .map(|&t| lppls_log_price(t, p).unwrap())
            .collect();
        (times, y)
    }

    #[test]
    fn profile_recovers_noiseless_coefficients() {
        let p = LpplsParams::new(115.0, 0.5, 8.0, 1.0, 10.0, -0.05, 0.005);
        let (t, y) = synthetic(&p, 111);
        let lin = profile_linear(&t, &y, p.tc, p.m, p.omega).unwrap();
        assert!((lin.a - p.a).abs() < 1e-8);
        assert!((lin.b - p.b).abs() < 1e-8);
        assert!((lin.c1 - p.c1()).abs() < 1e-8);
        assert!((lin.c2 - p.c2()).abs() < 1e-8);
        assert!(lin.sse <= 1e-16 * 111.0, "{}", lin.sse);
        assert!(!lin.is_degenerate());
    }

    #[test]
    fn profile_of_constant_data() {
        let t: Vec<f64> = (0..60).map(|i| i as f64).collect();
        let y = vec![7.25; 60];
        let lin = profile_linear(&t, &y, 70.0, 0.4, 9.0).unwrap();
        assert!((lin.a - 7.25).abs() < 1e-9);
        assert!(lin.b.abs() < 1e-9 && lin.c1.abs() < 1e-9 && lin.c2.abs() < 1e-9);
        assert!(lin.sse < 1e-20);
    }

    #[test]
    fn profile_preconditions() {
        let t: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y = vec![1.0; 10];
        assert!(matches!(
            profile_linear(&t, &y, 9.0, 0.5, 6.0),
            Err(ModelError::PastCriticalTime { .. })
        ));
        assert!(matches!(
            profile_linear(&t[..4], &y[..4], 20.0, 0.5, 6.0),
            Err(ModelError::TooFewObservations(4))
        ));
        // m = 0 makes tau^m collinear with the constant
        let r = profile_linear(&t, &y, 20.0, 0.0, 6.0);
        assert!(matches!(r, Err(ModelError::Singular)) || r.unwrap().is_degenerate());
    }

    #[test]
    fn profile_sse_is_linear_minimum() {
        let p = LpplsParams::new(130.0, 0.6, 9.0, 2.0, 5.0, -0.1, 0.02);
        let (t, mut y) = synthetic(&p, 120);
        for (i, v) in y.iter_mut().enumerate() {
            *v += 0.01 * ((i * 37 % 17) as f64 - 8.0) / 8.0;
        }
        let lin = profile_linear(&t, &y, p.tc, p.m, p.omega).unwrap();
        let sse_at = |a: f64, b: f64, c1: f64, c2: f64| -> f64 {
            t.iter()
                .zip(&y)
                .map(|(&ti, &yi)| {
                    let tau = p.tc - ti;
                    let tm = tau.powf(p.m);
                    let (s, c) = (p.omega * tau.ln()).sin_cos();
                    (yi - a - b * tm - c1 * tm * c - c2 * tm * s).powi(2)
                })
                .sum()
        };
        let base = [lin.a, lin.b, lin.c1, lin.c2];
        assert!((sse_at(base[0], base[1], base[2], base[3]) - lin.sse).abs() < 1e-12);
        for k in 0..4 {
            for d in [-1e-4, 1e-4] {
                let mut c = base;
                c[k] += d;
                assert!(sse_at(c[0], c[1], c[2], c[3]) >= lin.sse);
            }
        }
    }

    #[test]
    fn hazard_examples() {
        let hp = HazardParams {
            alpha: 1.0,
            beta: 0.5,
            m: 0.5,
            omega: 6.0,
            tc: 10.0,
            phi_prime: 0.0,
            kappa: 0.3,
        };
        assert!((hazard_rate(9.0, &hp).unwrap() - 1.5).abs() < 1e-15);
        let flat = HazardParams {
            beta: 0.0,
            alpha: 0.2,
            ..hp
        };
        let tau: f64 = 3.7;
        assert_eq!(
            hazard_rate(10.0 - tau, &flat).unwrap(),
            0.2 * tau.powf(-0.5)
        );
        assert!(hazard_rate(10.0, &hp).is_err());
        // envelope diverges approaching tc
        let mut prev = 0.0;
        for k in 1..12 {
            let h = hazard_rate(10.0 - 10f64.powi(-k), &flat).unwrap();
            assert!(h > prev);
            prev = h;
        }
        assert!(prev > 1e4);
    }

    #[test]
    fn hazard_validation() {
        let ok = HazardParams {
            alpha: 1.0,
            beta: 0.5,
            m: 0.5,
            omega: 6.0,
            tc: 10.0,
            phi_prime: 0.0,
            kappa: 0.3,
        };
        assert!(ok.validate().is_ok());
        assert!(HazardParams { beta: 1.0, ..ok }.validate().is_err());
        assert!(HazardParams { alpha: 0.0, ..ok }.validate().is_err());
        assert!(HazardParams { kappa: 1.5, ..ok }.validate().is_err());
        assert!(HazardParams { kappa: 0.0, ..ok }.validate().is_err());
    }

    #[test]
    fn identities() {
        let hp = HazardParams {
            alpha: 0.2,
            beta: 0.0,
            m: 0.5,
            omega: 6.0,
            tc: 10.0,
            phi_prime: 0.0,
            kappa: 0.5,
        };
        let (b, c) = coefficient_identities(&hp).unwrap();
        assert!((b + 0.2).abs() < 1e-15);
        assert_eq!(c, 0.0);
        let hp2 = HazardParams {
            kappa: 0.3,
            alpha: 1.0,
            beta: 0.4,
            m: 0.6,
            omega: 0.8,
            ..hp
        };
        let (_, c) = coefficient_identities(&hp2).unwrap();
        assert!((c + 0.12).abs() < 1e-15);
        assert!(coefficient_identities(&HazardParams { m: 0.0, ..hp }).is_err());
    }

    #[test]
    fn envelope_grows_super_exponentially() {
        let p = LpplsParams::new(100.0, 0.4, 7.0, 0.0, 10.0, -0.3, 0.0);
        let env = |t: f64| lppls_log_price(t, &p).unwrap();
        let rate = |t: f64| (env(t + 1e-3) - env(t - 1e-3)) / 2e-3;
        let mut prev = 0.0;
        for k in 0..99 {
            let r = rate(k as f64 + 0.5);
            assert!(r > prev);
            prev = r;
        }
    }

    proptest! {
        #[test]
        fn epoch_shift_invariance(
            k in -500.0f64..500.0,
            t in 0.0f64..99.0,
            m in 0.05f64..0.95,
            omega in 2.0f64..20.0,
            phi in 0.0f64..std::f64::consts::TAU,
        ) {
            let p = LpplsParams::new(100.0, m, omega, phi, 10.0, -0.1, 0.02);
            let q = LpplsParams { tc: p.tc + k, ..p };
            let a = lppls_log_price(t, &p).unwrap();
            let b = lppls_log_price(t + k, &q).unwrap();
            // tau is recomputed after shifting, so allow for its rounding
            let tol = 1e-12 * a.abs().max(1.0) + 1e-13 * (k.abs() + 100.0);
            prop_assert!((a - b).abs() <= tol, "{} vs {}", a, b);
        }

        #[test]
        fn hazard_is_non_negative(
            alpha in 0.001f64..5.0,
            beta in -0.999f64..0.999,
            m in 0.05f64..0.95,
            omega in 0.5f64..25.0,
            phi in 0.0f64..std::f64::consts::TAU,
            tau in 0.001f64..500.0,
        ) {
            let hp = HazardParams { alpha, beta, m, omega, tc: 0.0, phi_prime: phi, kappa: 0.5 };
            prop_assert!(hazard_rate(-tau, &hp).unwrap() >= 0.0);
        }
    }
}
