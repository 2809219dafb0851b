//! Parametric starting values for the root search.
//!
//! The rank estimating equations also have near-roots far from the
//! consistent one, where the scale of a covariate group collapses and its
//! location features shrink towards zero. A local search therefore has to
//! start in the right basin. The pilot here is the censored normal maximum
//! likelihood fit of the same location-scale model, augmented with an
//! intercept and a log-scale offset that the rank equations absorb into the
//! error distribution.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use libm::erfc;

use crate::error::{Error, Result};
use crate::estimator::weights::normal_hazard_minus_identity;
use crate::model::{SurvivalDataset, Theta};
use crate::solver::nelder_mead::{minimize, SearchOptions};

const PILOT_TOLERANCE: f64 = 1e-9;
const PILOT_ITERATIONS: usize = 5000;
const PILOT_RESTARTS: usize = 5;

/// `log(1 - Phi(u))`, accurate in the upper tail.
fn log_normal_survival(u: f64) -> f64 {
    if u > 8.0 {
        -0.5 * u * u - 0.5 * (2.0 * PI).ln() - (u + normal_hazard_minus_identity(u)).ln()
    } else {
        (0.5 * erfc(u * FRAC_1_SQRT_2)).ln()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Mean negative log-likelihood at `params = (a, s, beta, gamma)` for
/// `log T = a - beta'x + exp(s - gamma'z) e`, `e ~ N(0, 1)`.
fn negative_log_likelihood(data: &SurvivalDataset, params: &[f64]) -> f64 {
    let (a, s) = (params[0], params[1]);
    let beta = &params[2..2 + data.p()];
    let gamma = &params[2 + data.p()..];
    let mut total = 0.0;
    for obs in data.observations() {
        let log_sigma = s - dot(gamma, &obs.z);
        let u = (obs.log_time - a + dot(beta, &obs.x)) * (-log_sigma).exp();
        total +=
            if obs.event { -0.5 * u * u - 0.5 * (2.0 * PI).ln() - log_sigma } else { log_normal_survival(u) };
    }
    let value = -total / data.len() as f64;
    if value.is_finite() {
        value
    } else {
        f64::INFINITY
    }
}

/// Coefficients of the censored normal maximum likelihood fit.
pub fn normal_pilot(data: &SurvivalDataset) -> Result<Theta> {
    if data.is_empty() {
        return Err(Error::InvalidInput("no observations".into()));
    }
    let n = data.len() as f64;
    let mean = data.observations().iter().map(|o| o.log_time).sum::<f64>() / n;
    let variance =
        data.observations().iter().map(|o| (o.log_time - mean) * (o.log_time - mean)).sum::<f64>() / n;
    let mut start = vec![0.0; 2 + data.dim()];
    start[0] = mean;
    start[1] = 0.5 * variance.max(1e-12).ln();

    let f = |params: &[f64]| negative_log_likelihood(data, params);
    let mut best = start;
    let mut best_value = f(&best);
    for _ in 0..=PILOT_RESTARTS {
        let run = minimize(
            f,
            &best,
            &SearchOptions {
                initial_step: 0.25,
                diameter_tolerance: PILOT_TOLERANCE,
                value_target: f64::NEG_INFINITY,
                max_iterations: PILOT_ITERATIONS,
            },
        );
        if !(run.value < best_value) {
            break;
        }
        best = run.point;
        best_value = run.value;
    }
    if !best_value.is_finite() {
        return Err(Error::NotConverged("normal pilot likelihood is not finite".into()));
    }
    Theta::from_flat(&best[2..], data.p())
}
