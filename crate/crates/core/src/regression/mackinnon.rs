//! MacKinnon (1994) asymptotic p-value response surfaces and MacKinnon
//! (2010) finite-sample critical values for unit-root (N = 1) and
//! Engle-Granger cointegration (N >= 2) tau statistics.

use statrs::distribution::{ContinuousCDF, Normal};

use super::Deterministic;

const TAU_STAR_N: [f64; 6] = [-1.04, -1.53, -2.68, -3.09, -3.07, -3.77];
const TAU_MIN_N: [f64; 6] = [-19.04, -19.62, -21.21, -23.25, -21.63, -25.74];
const TAU_MAX_N: [f64; 6] = [f64::INFINITY, 1.51, 0.86, 0.88, 1.05, 1.24];
const TAU_STAR_C: [f64; 6] = [-1.61, -2.62, -3.13, -3.47, -3.78, -3.93];
const TAU_MIN_C: [f64; 6] = [-18.83, -18.86, -23.48, -28.07, -25.96, -23.27];
const TAU_MAX_C: [f64; 6] = [2.74, 0.92, 0.55, 0.61, 0.79, 1.0];
const TAU_STAR_CT: [f64; 6] = [-2.89, -3.19, -3.50, -3.65, -3.80, -4.36];
const TAU_MIN_CT: [f64; 6] = [-16.18, -21.15, -25.37, -26.63, -26.53, -26.18];
const TAU_MAX_CT: [f64; 6] = [0.7, 0.63, 0.71, 0.93, 1.19, 1.42];

// Left-tail polynomial in tau, ascending powers; third coefficient scaled 1e-2.
const SMALLP_N: [[f64; 3]; 6] = [
    [0.6344, 1.2378, 3.2496e-2],
    [1.9129, 1.3857, 3.5322e-2],
    [2.7648, 1.4502, 3.4186e-2],
    [3.4336, 1.4835, 3.19e-2],
    [4.0999, 1.5533, 3.59e-2],
    [4.5388, 1.5344, 2.9807e-2],
];
const SMALLP_C: [[f64; 3]; 6] = [
    [2.1659, 1.4412, 3.8269e-2],
    [2.92, 1.5012, 3.9796e-2],
    [3.4699, 1.4856, 3.164e-2],
    [3.9673, 1.4777, 2.6315e-2],
    [4.5509, 1.5338, 2.9545e-2],
    [5.1399, 1.6036, 3.4445e-2],
];
const SMALLP_CT: [[f64; 3]; 6] = [
    [3.2512, 1.6047, 4.9588e-2],
    [3.6646, 1.5419, 3.6448e-2],
    [4.0983, 1.5173, 2.9898e-2],
    [4.5844, 1.5338, 2.8796e-2],
    [5.0722, 1.5634, 2.9472e-2],
    [5.53, 1.5914, 3.0392e-2],
];

// Right-tail cubic, ascending powers.
const LARGEP_N: [[f64; 4]; 6] = [
    [0.4797, 9.3557e-1, -0.6999e-1, 3.3066e-2],
    [1.5578, 8.558e-1, -2.083e-1, -3.3549e-2],
    [2.2268, 6.8093e-1, -3.2362e-1, -5.4448e-2],
    [2.7654, 6.4502e-1, -3.0811e-1, -4.4946e-2],
    [3.2684, 6.8051e-1, -2.6778e-1, -3.4972e-2],
    [3.7268, 7.167e-1, -2.3648e-1, -2.8288e-2],
];
const LARGEP_C: [[f64; 4]; 6] = [
    [1.7339, 9.3202e-1, -1.2745e-1, -1.0368e-2],
    [2.1945, 6.4695e-1, -2.9198e-1, -4.2377e-2],
    [2.5893, 4.5168e-1, -3.6529e-1, -5.0074e-2],
    [3.0387, 4.5452e-1, -3.3666e-1, -4.1921e-2],
    [3.5049, 5.2098e-1, -2.9158e-1, -3.3468e-2],
    [3.9489, 5.8933e-1, -2.5359e-1, -2.721e-2],
];
const LARGEP_CT: [[f64; 4]; 6] = [
    [2.5261, 6.1654e-1, -3.7956e-1, -6.0285e-2],
    [2.85, 5.272e-1, -3.6622e-1, -5.1695e-2],
    [3.221, 5.255e-1, -3.2685e-1, -4.1501e-2],
    [3.652, 5.9758e-1, -2.7483e-1, -3.2081e-2],
    [4.0712, 6.6428e-1, -2.3464e-1, -2.546e-2],
    [4.4735, 7.1757e-1, -2.0681e-1, -2.1196e-2],
];

// Finite-sample critical values b0 + b1/T + b2/T^2 + b3/T^3 at 1%, 5%, 10%.
const CRIT_N: [[[f64; 4]; 3]; 1] = [[
    [-2.56574, -2.2358, -3.627, 0.0],
    [-1.94100, -0.2686, -3.365, 31.223],
    [-1.61682, 0.2656, -2.714, 25.364],
]];
const CRIT_C: [[[f64; 4]; 3]; 2] = [
    [
        [-3.43035, -6.5393, -16.786, -79.433],
        [-2.86154, -2.8903, -4.234, -40.040],
        [-2.56677, -1.5384, -2.809, 0.0],
    ],
    [
        [-3.89644, -10.9519, -33.527, 0.0],
        [-3.33613, -6.1101, -6.823, 0.0],
        [-3.04445, -4.2412, -2.720, 0.0],
    ],
];
const CRIT_CT: [[[f64; 4]; 3]; 2] = [
    [
        [-3.95877, -9.0531, -28.428, -134.155],
        [-3.41049, -4.3904, -9.036, -45.374],
        [-3.12705, -2.5856, -3.925, -22.380],
    ],
    [
        [-4.32762, -15.4387, -35.679, 0.0],
        [-3.78057, -9.5106, -12.074, 0.0],
        [-3.49631, -7.0815, -7.538, 21.892],
    ],
];

fn polyval(coef_ascending: &[f64], x: f64) -> f64 {
    coef_ascending.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn std_normal_cdf(x: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("unit normal").cdf(x)
}

/// Approximate p-value of a tau statistic. `n_series` is 1 for the ADF test
/// and the number of variables in the cointegrating regression otherwise
/// (1..=6).
///
/// The two response-surface branches meet at tau* with a small downward jump
/// in some cases; the right branch is floored at the left branch's value at
/// tau*, and a few polynomials turn over just inside [tau_min, tau_max]. Each
/// branch therefore uses the running maximum of its polynomial, floored at
/// the left branch's value at tau*, so the p-value is non-decreasing in the
/// statistic. Away from those edges the values equal the raw surface.
pub fn mackinnon_p(stat: f64, det: Deterministic, n_series: usize) -> f64 {
    assert!((1..=6).contains(&n_series), "n_series must be in 1..=6");
    if stat.is_nan() {
        return f64::NAN;
    }
    let i = n_series - 1;
    let (star, min, max, small, large) = match det {
        Deterministic::None => (
            TAU_STAR_N[i],
            TAU_MIN_N[i],
            TAU_MAX_N[i],
            &SMALLP_N[i],
            &LARGEP_N[i],
        ),
        Deterministic::Constant => (
            TAU_STAR_C[i],
            TAU_MIN_C[i],
            TAU_MAX_C[i],
            &SMALLP_C[i],
            &LARGEP_C[i],
        ),
        Deterministic::ConstantTrend => (
            TAU_STAR_CT[i],
            TAU_MIN_CT[i],
            TAU_MAX_CT[i],
            &SMALLP_CT[i],
            &LARGEP_CT[i],
        ),
    };
    if stat > max {
        return 1.0;
    }
    if stat < min {
        return 0.0;
    }
    if stat <= star {
        std_normal_cdf(running_max(small, min, stat))
    } else {
        let floor = std_normal_cdf(polyval(small, star));
        std_normal_cdf(running_max(large, star, stat)).max(floor)
    }
}

/// `max` of the polynomial over `[lo, x]`, from its endpoints and interior
/// critical points (degree <= 3).
fn running_max(coef: &[f64], lo: f64, x: f64) -> f64 {
    let mut best = polyval(coef, lo).max(polyval(coef, x));
    let mut consider = |r: f64| {
        if r > lo && r < x {
            best = best.max(polyval(coef, r));
        }
    };
    // derivative: c1 + 2 c2 r + 3 c3 r^2
    let (a, b, c) = match coef.len() {
        3 => (0.0, 2.0 * coef[2], coef[1]),
        4 => (3.0 * coef[3], 2.0 * coef[2], coef[1]),
        _ => return best,
    };
    if a == 0.0 {
        if b != 0.0 {
            consider(-c / b);
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            consider((-b + sq) / (2.0 * a));
            consider((-b - sq) / (2.0 * a));
        }
    }
    best
}

/// Critical values at the 1%, 5% and 10% levels for sample size `nobs`.
/// Available for N = 1 (all cases) and N = 2 (constant, constant+trend).
pub fn mackinnon_crit(det: Deterministic, n_series: usize, nobs: usize) -> Option<[f64; 3]> {
    let table = match (det, n_series) {
        (Deterministic::None, 1) => &CRIT_N[0],
        (Deterministic::Constant, 1 | 2) => &CRIT_C[n_series - 1],
        (Deterministic::ConstantTrend, 1 | 2) => &CRIT_CT[n_series - 1],
        _ => return None,
    };
    let inv = 1.0 / nobs as f64;
    let mut out = [0.0; 3];
    for (o, row) in out.iter_mut().zip(table) {
        *o = polyval(row, inv);
    }
    Some(out)
}
