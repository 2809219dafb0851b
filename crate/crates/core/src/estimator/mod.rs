//! Rank-based estimating function, at-risk averages and the Nelson–Aalen
//! type estimator of the error cumulative hazard, all computed on the
//! residual scale `exp(gamma'z) (log t + beta'x)`.

mod risk;
pub mod weights;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::{SurvivalDataset, Theta};

pub(crate) use risk::RiskTable;
pub use weights::{weight_eval, WeightSpec};

/// Upper integration limit on the residual scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tau {
    Finite(f64),
    Infinite,
}

impl Tau {
    pub fn new(value: f64) -> Result<Self> {
        if value == f64::INFINITY {
            Ok(Tau::Infinite)
        } else if value.is_finite() {
            Ok(Tau::Finite(value))
        } else {
            Err(Error::InvalidInput(format!("invalid truncation point {value}")))
        }
    }

    /// Whether `u <= tau`.
    pub fn admits(self, u: f64) -> bool {
        match self {
            Tau::Finite(tau) => u <= tau,
            Tau::Infinite => true,
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Tau::Finite(tau) => tau,
            Tau::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for Tau {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tau::Finite(tau) => write!(f, "{tau}"),
            Tau::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Tau {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "+inf" => Ok(Tau::Infinite),
            other => other
                .parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("invalid truncation point `{s}`")))
                .and_then(Tau::new),
        }
    }
}

impl Serialize for Tau {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Tau::Finite(tau) => serializer.serialize_f64(*tau),
            Tau::Infinite => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Tau {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Number(v) => Tau::new(v).map_err(serde::de::Error::custom),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub tau: Tau,
    pub weight: WeightSpec,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self { tau: Tau::Infinite, weight: WeightSpec::LogRank }
    }
}

/// At-risk summaries at a point `t` of the residual scale.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskSummary {
    pub t: f64,
    /// Fraction of the sample with residual `>= t`.
    pub d0: f64,
    /// At-risk mean of `exp(gamma'z) x`.
    pub eta_beta: Vec<f64>,
    /// At-risk mean of `z`.
    pub eta_gamma: Vec<f64>,
}

/// Right-continuous cumulative hazard with jumps at `times`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepHazard {
    times: Vec<f64>,
    increments: Vec<f64>,
}

impl StepHazard {
    pub fn new(times: Vec<f64>, increments: Vec<f64>) -> Result<Self> {
        if times.len() != increments.len() {
            return Err(Error::InvalidInput("jump times and increments differ in length".into()));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("jump times must be strictly increasing".into()));
        }
        if increments.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidInput("increments must be positive".into()));
        }
        Ok(Self { times, increments })
    }

    pub fn empty() -> Self {
        Self { times: Vec::new(), increments: Vec::new() }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Running sums of the increments, one per jump.
    pub fn cumulative(&self) -> Vec<f64> {
        self.increments
            .iter()
            .scan(0.0, |acc, inc| {
                *acc += inc;
                Some(*acc)
            })
            .collect()
    }

    pub fn value(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s <= t);
        self.increments[..k].iter().sum()
    }

    pub fn curve(&self) -> StepCurve {
        StepCurve { knots: self.times.clone(), values: self.cumulative() }
    }
}

/// Right-continuous step function that is zero below its first knot.
///
/// Used both for the fitted hazard and for resampled hazards, which need not
/// be monotone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepCurve {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl StepCurve {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() != values.len() {
            return Err(Error::InvalidInput("knots and values differ in length".into()));
        }
        if knots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("knots must be strictly increasing".into()));
        }
        Ok(Self { knots, values })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, t: f64) -> f64 {
        match self.knots.partition_point(|&s| s <= t) {
            0 => 0.0,
            k => self.values[k - 1],
        }
    }

    /// Largest value attained.
    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Generalized inverse `inf { t : A(t) >= y }`; `None` when `y` is never
    /// reached.
    pub fn inverse(&self, y: f64) -> Option<f64> {
        if y <= 0.0 {
            return Some(f64::NEG_INFINITY);
        }
        self.values.iter().position(|&v| v >= y).map(|k| self.knots[k])
    }
}

/// Residuals of every observation, in data order.
pub fn residuals(data: &SurvivalDataset, theta: &Theta) -> Result<Vec<f64>> {
    data.check_theta(theta)?;
    data.observations().iter().map(|o| crate::model::residual(o, theta)).collect()
}

pub fn risk_summary(data: &SurvivalDataset, theta: &Theta, t: f64) -> Result<RiskSummary> {
    RiskTable::build(data, theta)?.summary(t)
}

pub fn nelson_aalen(data: &SurvivalDataset, theta: &Theta, tau: Tau) -> Result<StepHazard> {
    Ok(RiskTable::build(data, theta)?.hazard(tau))
}

/// The estimating function, a vector of length `p + q`.
pub fn score(data: &SurvivalDataset, theta: &Theta, cfg: &EstimatorConfig) -> Result<Vec<f64>> {
    Ok(RiskTable::build(data, theta)?.score(cfg))
}

/// Euclidean norm of the estimating function.
pub fn objective(data: &SurvivalDataset, theta: &Theta, cfg: &EstimatorConfig) -> Result<f64> {
    score(data, theta, cfg).map(|s| norm(&s))
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
