//! Multistart Levenberg-Marquardt calibration of the LPPLS model on one
//! window. The linear coefficients are profiled out, so the optimiser works
//! on `(tc, m, omega)` only, using the exact variable-projection Jacobian.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lppls::{solve_linear, LinearSolve, LpplsParams, ModelError, MAX_CONDITION};
use crate::series::{PriceSeries, SeriesError, Window};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrateError {
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid fit configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmSettings {
    pub max_iterations: usize,
    /// Infinity norm of the projected gradient of `SSE / 2`.
    pub gradient_tol: f64,
    /// Step size relative to the parameter vector.
    pub step_tol: f64,
    pub initial_damping: f64,
}

impl Default for LmSettings {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            gradient_tol: 1e-10,
            step_tol: 1e-12,
            initial_damping: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub n_starts: usize,
    /// Earliest critical time, in months after `t2`.
    pub tc_min_offset: f64,
    /// Latest critical time, as a fraction of the window length past `t2`.
    pub tc_max_fraction: f64,
    pub m_bounds: (f64, f64),
    pub omega_bounds: (f64, f64),
    pub lm: LmSettings,
    pub rng_seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            n_starts: 50,
            tc_min_offset: 0.1,
            tc_max_fraction: 0.2,
            m_bounds: (0.005, 0.995),
            omega_bounds: (1.0, 30.0),
            lm: LmSettings::default(),
            rng_seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<(), CalibrateError> {
        let bad = |msg: &str| Err(CalibrateError::Config(msg.to_string()));
        if self.n_starts == 0 {
            return bad("n_starts must be at least 1");
        }
        if !(self.tc_min_offset.is_finite() && self.tc_max_fraction.is_finite()) {
            return bad("critical-time bounds must be finite");
        }
        let (mlo, mhi) = self.m_bounds;
        if !(0.0 <= mlo && mlo < mhi && mhi <= 1.0) {
            return bad("m bounds must be a non-empty interval within [0, 1]");
        }
        let (wlo, whi) = self.omega_bounds;
        if !(0.0 < wlo && wlo < whi && whi.is_finite()) {
            return bad("omega bounds must be a non-empty interval within (0, inf)");
        }
        let lm = &self.lm;
        if lm.max_iterations == 0
            || !(lm.gradient_tol >= 0.0)
            || !(lm.step_tol >= 0.0)
            || !(lm.initial_damping > 0.0)
        {
            return bad("invalid Levenberg-Marquardt settings");
        }
        Ok(())
    }

    /// Search box `[lo, hi]` for `(tc - t2, m, omega)` given window length `dt`.
    pub fn search_box(&self, dt: f64) -> Result<([f64; 3], [f64; 3]), CalibrateError> {
        let tc_hi = self.tc_max_fraction * dt;
        if !(self.tc_min_offset > 0.0 && self.tc_min_offset < tc_hi) {
            return Err(CalibrateError::Config(format!(
                "critical-time interval ({}, {}] past t2 is empty or admits tc <= t2",
                self.tc_min_offset, tc_hi
            )));
        }
        Ok((
            [self.tc_min_offset, self.m_bounds.0, self.omega_bounds.0],
            [tc_hi, self.m_bounds.1, self.omega_bounds.1],
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpplsFit {
    pub params: LpplsParams,
    pub sse: f64,
    pub window: Window,
    pub converged: bool,
    pub n_observations: usize,
    /// Ill-conditioned linear sub-problem somewhere on the winning path,
    /// or an unidentifiable (flat) series.
    pub condition_flag: bool,
    /// No usable parameters: a flat series or no start could be evaluated.
    pub degenerate: bool,
    pub iterations: usize,
    pub failed_starts: usize,
    pub note: Option<String>,
}

/// Profiled residuals `y - X(theta) beta(theta)` and their derivatives with
/// respect to `(tc, m, omega)`, as an `n x 3` matrix.
pub fn residuals_and_jacobian(
    times: &[f64],
    log_prices: &[f64],
    tc: f64,
    m: f64,
    omega: f64,
) -> Result<(DVector<f64>, DMatrix<f64>), ModelError> {
    let s = solve_linear(times, log_prices, tc, m, omega)?;
    let j = projection_jacobian(times, &s, tc, m, omega);
    Ok((s.residuals, j))
}

/// Golub-Pereyra derivative of the projected residual:
/// `-(I - P) dX c - Q R^-T D^-1 dX^T r` for each nonlinear parameter.
fn projection_jacobian(
    times: &[f64],
    s: &LinearSolve,
    tc: f64,
    m: f64,
    omega: f64,
) -> DMatrix<f64> {
    let n = times.len();
    let c = &s.coef;
    let r = &s.residuals;
    let mut jac = DMatrix::zeros(n, 3);
    // dX for each parameter; the constant column has zero derivative.
    let mut dx = [
        DMatrix::<f64>::zeros(n, 3),
        DMatrix::zeros(n, 3),
        DMatrix::zeros(n, 3),
    ];
    for (i, &t) in times.iter().enumerate() {
        let tau = tc - t;
        let lt = tau.ln();
        let (sn, cs) = (omega * lt).sin_cos();
        let f = s.x[(i, 1)];
        let g = s.x[(i, 2)];
        let h = s.x[(i, 3)];
        let tm1 = f / tau;
        dx[0][(i, 0)] = m * tm1;
        dx[0][(i, 1)] = tm1 * (m * cs - omega * sn);
        dx[0][(i, 2)] = tm1 * (m * sn + omega * cs);
        dx[1][(i, 0)] = lt * f;
        dx[1][(i, 1)] = lt * g;
        dx[1][(i, 2)] = lt * h;
        dx[2][(i, 1)] = -lt * h;
        dx[2][(i, 2)] = lt * g;
    }
    let qt = s.q.transpose();
    for (k, d) in dx.iter().enumerate() {
        let v = d * Vector3::new(c[1], c[2], c[3]);
        let u = &v - &s.q * (&qt * &v);
        let w = d.transpose() * r;
        let mut ws = DVector::zeros(4);
        for j in 0..3 {
            ws[j + 1] = w[j] / s.col_norms[j + 1];
        }
        let z =
            s.r.transpose()
                .solve_lower_triangular(&ws)
                .unwrap_or_else(|| DVector::zeros(4));
        let col = -(u + &s.q * z);
        jac.set_column(k, &col);
    }
    jac
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut x = 0.0;
    while i > 0 {
        x += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    x
}

/// Start points for `(tc, m, omega)`, with `tc` in absolute months. The
/// first start is the box centre; the rest follow a randomly shifted Halton
/// sequence, so the sequence for `n` starts is a prefix of that for `n + 1`.
pub fn generate_starts(
    config: &FitConfig,
    window: &Window,
) -> Result<Vec<[f64; 3]>, CalibrateError> {
    config.validate()?;
    let (lo, hi) = config.search_box(window.dt())?;
    let t2 = window.t2().as_months();
    Ok(relative_starts(config, lo, hi)
        .into_iter()
        .map(|[a, b, c]| [t2 + a, b, c])
        .collect())
}

fn relative_starts(config: &FitConfig, lo: [f64; 3], hi: [f64; 3]) -> Vec<[f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let shift: [f64; 3] = [rng.gen(), rng.gen(), rng.gen()];
    let bases = [2u64, 3, 5];
    (0..config.n_starts)
        .map(|i| {
            let mut p = [0.0; 3];
            for d in 0..3 {
                let u = if i == 0 {
                    0.5
                } else {
                    (radical_inverse(i as u64, bases[d]) + shift[d]).fract()
                };
                p[d] = lo[d] + u * (hi[d] - lo[d]);
            }
            p
        })
        .collect()
}

/// One refined start, in window-relative coordinates.
#[derive(Debug, Clone)]
struct Candidate {
    theta: [f64; 3],
    sse: f64,
    converged: bool,
    ill_conditioned: bool,
    iterations: usize,
}

struct Problem<'a> {
    times: &'a [f64],
    y: &'a [f64],
    lo: [f64; 3],
    hi: [f64; 3],
    lm: LmSettings,
}

impl Problem<'_> {
    fn clamp(&self, th: [f64; 3]) -> [f64; 3] {
        let mut out = th;
        for d in 0..3 {
            out[d] = th[d].clamp(self.lo[d], self.hi[d]);
        }
        out
    }

    fn solve(&self, th: &[f64; 3]) -> Option<LinearSolve> {
        let s = solve_linear(self.times, self.y, th[0], th[1], th[2]).ok()?;
        s.sse.is_finite().then_some(s)
    }

    fn refine(&self, start: [f64; 3]) -> Option<Candidate> {
        let mut th = self.clamp(start);
        let mut cur = self.solve(&th)?;
        let mut ill = cur.condition > MAX_CONDITION;
        let mut lambda = self.lm.initial_damping;
        let mut scale = Vector3::<f64>::zeros();
        let mut converged = false;
        let mut iterations = 0;

        'outer: while iterations < self.lm.max_iterations {
            iterations += 1;
            let jac = projection_jacobian(self.times, &cur, th[0], th[1], th[2]);
            let jtj: Matrix3<f64> = (jac.transpose() * &jac).fixed_view::<3, 3>(0, 0).into();
            let grad: Vector3<f64> = (jac.transpose() * &cur.residuals).fixed_rows::<3>(0).into();
            if !grad.iter().all(|g| g.is_finite()) {
                break;
            }

            // Coordinates pinned at a bound with the descent direction
            // pointing outward are held fixed for this iteration.
            let mut active = [false; 3];
            let mut pg = 0.0f64;
            for d in 0..3 {
                let at_lo = th[d] <= self.lo[d] && grad[d] > 0.0;
                let at_hi = th[d] >= self.hi[d] && grad[d] < 0.0;
                active[d] = at_lo || at_hi;
                if !active[d] {
                    pg = pg.max(grad[d].abs());
                }
            }
            if pg < self.lm.gradient_tol {
                converged = true;
                break;
            }
            for d in 0..3 {
                scale[d] = scale[d].max(jtj[(d, d)]);
            }

            loop {
                let mut a = jtj;
                let mut rhs = -grad;
                for d in 0..3 {
                    a[(d, d)] += lambda * scale[d].max(f64::MIN_POSITIVE);
                }
                for d in (0..3).filter(|&d| active[d]) {
                    a.row_mut(d).fill(0.0);
                    a.column_mut(d).fill(0.0);
                    a[(d, d)] = 1.0;
                    rhs[d] = 0.0;
                }
                let step = a.cholesky().map(|ch| ch.solve(&rhs));
                if let Some(step) = step.filter(|s| s.iter().all(|v| v.is_finite())) {
                    let trial = self.clamp([th[0] + step[0], th[1] + step[1], th[2] + step[2]]);
                    let moved = (0..3).map(|d| (trial[d] - th[d]).abs()).fold(0.0, f64::max);
                    let size = th.iter().map(|v| v.abs()).fold(0.0, f64::max);
                    if moved <= self.lm.step_tol * (size + self.lm.step_tol) {
                        converged = true;
                        break 'outer;
                    }
                    if let Some(next) = self.solve(&trial) {
                        if next.sse < cur.sse {
                            ill |= next.condition > MAX_CONDITION;
                            th = trial;
                            cur = next;
                            lambda = (lambda / 10.0).max(1e-15);
                            continue 'outer;
                        }
                    }
                }
                lambda *= 10.0;
                if lambda > 1e16 {
                    // no descent available at machine precision
                    converged = true;
                    break 'outer;
                }
            }
        }
        Some(Candidate {
            theta: th,
            sse: cur.sse,
            converged,
            ill_conditioned: ill,
            iterations,
        })
    }
}

/// Lowest SSE wins; near-ties go to the smallest `tc`, then the smallest `m`.
fn select(cands: &[Candidate]) -> Option<&Candidate> {
    let best = cands.iter().map(|c| c.sse).fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return None;
    }
    let tol = best * 1e-12;
    cands.iter().filter(|c| c.sse <= best + tol).min_by(|a, b| {
        a.theta[0]
            .total_cmp(&b.theta[0])
            .then(a.theta[1].total_cmp(&b.theta[1]))
    })
}

/// Calibrates the LPPLS model to the log-prices of `series` inside `window`.
pub fn fit_window(
    series: &PriceSeries,
    window: &Window,
    config: &FitConfig,
) -> Result<LpplsFit, CalibrateError> {
    let w = series.slice(window)?;
    fit_log_prices(&w.log_values(), window, config)
}

/// As [`fit_window`], for log-prices already cut to the window (one per
/// month from `t1` to `t2`).
pub fn fit_log_prices(
    log_prices: &[f64],
    window: &Window,
    config: &FitConfig,
) -> Result<LpplsFit, CalibrateError> {
    config.validate()?;
    let n = window.n_obs();
    if log_prices.len() != n {
        return Err(ModelError::LengthMismatch(n, log_prices.len()).into());
    }
    if log_prices.iter().any(|v| !v.is_finite()) {
        return Err(CalibrateError::Config("non-finite log-price".into()));
    }
    let (lo, hi) = config.search_box(window.dt())?;
    // Months relative to t2 keep the optimisation independent of the epoch.
    let times: Vec<f64> = (0..n).map(|i| i as f64 - (n - 1) as f64).collect();
    let t2 = window.t2().as_months();
    let problem = Problem {
        times: &times,
        y: log_prices,
        lo,
        hi,
        lm: config.lm,
    };
    let starts = relative_starts(config, lo, hi);

    let flat = is_flat(log_prices);
    let results: Vec<Option<Candidate>> = starts.par_iter().map(|s| problem.refine(*s)).collect();
    let failed_starts = results.iter().filter(|r| r.is_none()).count();
    let cands: Vec<Candidate> = results.into_iter().flatten().collect();

    let Some(best) = select(&cands) else {
        let nan = f64::NAN;
        return Ok(LpplsFit {
            params: LpplsParams::new(nan, nan, nan, 0.0, nan, nan, 0.0),
            sse: f64::INFINITY,
            window: *window,
            converged: false,
            n_observations: n,
            condition_flag: true,
            degenerate: true,
            iterations: 0,
            failed_starts,
            note: Some("every start hit a singular linear system".into()),
        });
    };
    let th = best.theta;
    let lin = solve_linear(&times, log_prices, th[0], th[1], th[2])?;
    let params = LpplsParams::new(
        t2 + th[0],
        th[1],
        th[2],
        lin.coef[3].atan2(lin.coef[2]),
        lin.coef[0],
        lin.coef[1],
        lin.coef[2].hypot(lin.coef[3]),
    );
    let note = if flat {
        Some("series is flat; power-law and oscillation terms are unidentifiable".into())
    } else if !best.converged {
        Some("iteration limit reached".into())
    } else {
        None
    };
    Ok(LpplsFit {
        params,
        sse: lin.sse,
        window: *window,
        converged: best.converged && !flat,
        n_observations: n,
        condition_flag: best.ill_conditioned || flat,
        degenerate: flat,
        iterations: best.iterations,
        failed_starts,
        note,
    })
}

fn is_flat(y: &[f64]) -> bool {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let scale = y
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    sst.sqrt() <= 1e-12 * scale * n.sqrt()
}
