//! Quantities derived from a fitted model: conditional survivor functions,
//! conditional quantiles and quantile ratios, with pointwise bands from the
//! multiplier draws.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{StepCurve, Tau};
use crate::inference::MultiplierDraws;
use crate::model::{location_scale, Theta};
use crate::solver::FitResult;

/// Minimum number of valid draws behind a band.
pub const MIN_VALID_DRAWS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateProfile {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
}

impl CovariateProfile {
    pub fn new(x: Vec<f64>, z: Vec<f64>) -> Result<Self> {
        if x.iter().chain(&z).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("profile covariates must be finite".into()));
        }
        Ok(Self { x, z })
    }

    fn location_scale(&self, theta: &Theta) -> Result<(f64, f64)> {
        if self.x.len() != theta.p() || self.z.len() != theta.q() {
            return Err(Error::InvalidInput(format!(
                "profile has dimensions ({}, {}), model has ({}, {})",
                self.x.len(),
                self.z.len(),
                theta.p(),
                theta.q()
            )));
        }
        location_scale(&self.x, &self.z, theta)
    }
}

/// A coefficient vector with a cumulative hazard of the error term: the
/// fitted pair or one multiplier draw.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub theta: Theta,
    pub hazard: StepCurve,
    pub tau: Tau,
}

impl ModelState {
    pub fn from_fit(fit: &FitResult) -> Self {
        Self { theta: fit.theta_hat.clone(), hazard: fit.hazard.curve(), tau: fit.estimator.tau }
    }

    /// Every draw as a state; hazards are step-interpolated between grid
    /// points.
    pub fn from_draws(draws: &MultiplierDraws, tau: Tau) -> Vec<Self> {
        (0..draws.m()).map(|b| Self { theta: draws.theta(b), hazard: draws.hazard_curve(b), tau }).collect()
    }

    /// `A^{-1}(-log(1 - pi))`, the log of the baseline quantile.
    fn log_baseline_quantile(&self, pi: f64) -> Result<f64> {
        if !(pi > 0.0 && pi < 1.0) {
            return Err(Error::InvalidInput(format!("probability {pi} not in (0, 1)")));
        }
        self.hazard.inverse(-(-pi).ln_1p()).ok_or(Error::QuantileOutOfRange { pi })
    }
}

/// `S(t | profile) = exp(-A((log t - mu) / sigma))`.
pub fn conditional_survivor(state: &ModelState, profile: &CovariateProfile, t: f64) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!("time {t} must be positive")));
    }
    let (mu, sigma) = profile.location_scale(&state.theta)?;
    let residual = (t.ln() - mu) / sigma;
    if !state.tau.admits(residual) {
        return Err(Error::Extrapolation { residual, tau: state.tau.value() });
    }
    Ok((-state.hazard.value(residual)).exp())
}

/// `Q(pi | profile) = exp(mu + sigma * A^{-1}(-log(1 - pi)))`.
pub fn conditional_quantile(state: &ModelState, profile: &CovariateProfile, pi: f64) -> Result<f64> {
    let s = state.log_baseline_quantile(pi)?;
    let (mu, sigma) = profile.location_scale(&state.theta)?;
    Ok((mu + sigma * s).exp())
}

/// `log(Q_j(pi) / Q_i(pi))`; exactly antisymmetric in the two profiles.
pub fn log_quantile_ratio(
    state: &ModelState,
    profile_j: &CovariateProfile,
    profile_i: &CovariateProfile,
    pi: f64,
) -> Result<f64> {
    let s = state.log_baseline_quantile(pi)?;
    let (mu_j, sigma_j) = profile_j.location_scale(&state.theta)?;
    let (mu_i, sigma_i) = profile_i.location_scale(&state.theta)?;
    Ok((mu_j - mu_i) + (sigma_j - sigma_i) * s)
}

/// `Q_j(pi) / Q_i(pi)`.
///
/// Swapping the profiles returns the floating-point reciprocal, so the two
/// orientations multiply to exactly one.
pub fn quantile_ratio(
    state: &ModelState,
    profile_j: &CovariateProfile,
    profile_i: &CovariateProfile,
    pi: f64,
) -> Result<f64> {
    let d = log_quantile_ratio(state, profile_j, profile_i, pi)?;
    Ok(if d > 0.0 {
        reciprocable(d.exp())
    } else if d < 0.0 {
        1.0 / reciprocable((-d).exp())
    } else {
        1.0
    })
}

/// The float nearest `x` (within a few ulp) whose product with its rounded
/// reciprocal rounds to one; `x` itself if none is found.
fn reciprocable(x: f64) -> f64 {
    if !x.is_finite() || x <= 0.0 {
        return x;
    }
    let bits = x.to_bits();
    for k in 0..16u64 {
        for candidate in [bits.saturating_add(k), bits.saturating_sub(k)] {
            let c = f64::from_bits(candidate);
            if c * (1.0 / c) == 1.0 {
                return c;
            }
        }
    }
    x
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
    /// Draws on which the functional was defined.
    pub valid_draws: usize,
}

/// Linear-interpolation sample quantile (type 7) of sorted data.
pub fn sample_quantile(sorted: &[f64], prob: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let h = (sorted.len() - 1) as f64 * prob.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Pointwise band for a functional `w(theta, A)`: the estimate at the fit
/// and empirical `(1 - level) / 2`, `(1 + level) / 2` quantiles over the
/// draws. Draws on which `w` is undefined are skipped.
pub fn functional_band<W>(fitted: &ModelState, draws: &[ModelState], w: W, level: f64) -> Result<Band>
where
    W: Fn(&ModelState) -> Result<f64> + Sync,
{
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidInput(format!("level {level} not in (0, 1)")));
    }
    let estimate = w(fitted)?;
    let mut values: Vec<f64> =
        draws.par_iter().filter_map(|state| w(state).ok().filter(|v| v.is_finite())).collect();
    if values.len() < MIN_VALID_DRAWS {
        return Err(Error::InsufficientDraws { valid: values.len(), required: MIN_VALID_DRAWS });
    }
    values.sort_by(f64::total_cmp);
    Ok(Band {
        estimate,
        lo: sample_quantile(&values, (1.0 - level) / 2.0),
        hi: sample_quantile(&values, (1.0 + level) / 2.0),
        valid_draws: values.len(),
    })
}

/// `0.01, 0.02, ..., 0.99`.
pub fn ratio_pi_grid() -> Vec<f64> {
    (1..=99).map(|k| f64::from(k) / 100.0).collect()
}

/// Times at which the fitted survivor curve of `profile` steps down: for
/// each hazard knot, the first time whose residual reaches it.
pub fn survivor_jump_times(fitted: &ModelState, profile: &CovariateProfile) -> Result<Vec<f64>> {
    let (mu, sigma) = profile.location_scale(&fitted.theta)?;
    let residual = |t: f64| (t.ln() - mu) / sigma;
    Ok(fitted
        .hazard
        .knots()
        .iter()
        .map(|&s| {
            let mut t = (mu + sigma * s).exp();
            // exp and log do not round-trip exactly.
            while t > 0.0 && residual(t.next_down()) >= s {
                t = t.next_down();
            }
            while residual(t) < s && t < f64::MAX {
                t = t.next_up();
            }
            t
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivorPoint {
    pub time: f64,
    pub band: Band,
}

/// Survivor curve of `profile` with bands at the given times. Times beyond
/// `tau` on the residual scale are skipped.
pub fn survivor_curve(
    fitted: &ModelState,
    draws: &[ModelState],
    profile: &CovariateProfile,
    times: &[f64],
    level: f64,
) -> Result<Vec<SurvivorPoint>> {
    let mut out = Vec::with_capacity(times.len());
    for &time in times {
        match functional_band(fitted, draws, |s| conditional_survivor(s, profile, time), level) {
            Ok(band) => out.push(SurvivorPoint { time, band }),
            Err(Error::Extrapolation { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioPoint {
    pub pi: f64,
    pub band: Band,
}

/// Quantile ratio `Q_j / Q_i` over `pis` with bands. Probabilities whose
/// quantile the fitted hazard does not reach are skipped.
pub fn ratio_curve(
    fitted: &ModelState,
    draws: &[ModelState],
    profile_j: &CovariateProfile,
    profile_i: &CovariateProfile,
    pis: &[f64],
    level: f64,
) -> Result<Vec<RatioPoint>> {
    let mut out = Vec::with_capacity(pis.len());
    for &pi in pis {
        let w = |s: &ModelState| quantile_ratio(s, profile_j, profile_i, pi);
        match functional_band(fitted, draws, w, level) {
            Ok(band) => out.push(RatioPoint { pi, band }),
            Err(Error::QuantileOutOfRange { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KaplanMeierPoint {
    pub time: f64,
    pub survival: f64,
    pub at_risk: usize,
    pub events: usize,
}

/// Product-limit estimate, one point per distinct event time. Subjects
/// censored at an event time count as at risk there.
pub fn kaplan_meier(times: &[f64], events: &[bool]) -> Result<Vec<KaplanMeierPoint>> {
    if times.len() != events.len() {
        return Err(Error::InvalidInput("times and events differ in length".into()));
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidInput("times must be finite".into()));
    }
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let mut out = Vec::new();
    let mut survival = 1.0;
    let mut at_risk = times.len();
    let mut k = 0;
    while k < order.len() {
        let time = times[order[k]];
        let tied = order[k..].iter().take_while(|&&i| times[i] == time).count();
        let d = order[k..k + tied].iter().filter(|&&i| events[i]).count();
        if d > 0 {
            survival *= 1.0 - d as f64 / at_risk as f64;
            out.push(KaplanMeierPoint { time, survival, at_risk, events: d });
        }
        at_risk -= tied;
        k += tied;
    }
    Ok(out)
}
