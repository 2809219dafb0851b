//! Parameters, observations and the residual transform of the log-linear
//! location-scale model `log T = mu + sigma * e`, with `mu = -beta'x` and
//! `sigma = exp(-gamma'z)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest admissible `|gamma'z|` before `exp` is considered to overflow.
pub const MAX_SCALE_EXPONENT: f64 = 700.0;

/// Regression coefficients: `beta` for the location, `gamma` for the scale.
///
/// Whenever the two blocks are flattened the order is `(beta, gamma)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theta {
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl Theta {
    pub fn new(beta: Vec<f64>, gamma: Vec<f64>) -> Result<Self> {
        if beta.is_empty() && gamma.is_empty() {
            return Err(Error::InvalidInput("theta needs at least one coefficient".into()));
        }
        if beta.iter().chain(&gamma).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("theta entries must be finite".into()));
        }
        Ok(Self { beta, gamma })
    }

    pub fn zeros(p: usize, q: usize) -> Self {
        Self { beta: vec![0.0; p], gamma: vec![0.0; q] }
    }

    /// Split a flat `(beta, gamma)` vector.
    pub fn from_flat(values: &[f64], p: usize) -> Result<Self> {
        if p > values.len() {
            return Err(Error::InvalidInput(format!("cannot split {} values with p = {p}", values.len())));
        }
        Self::new(values[..p].to_vec(), values[p..].to_vec())
    }

    pub fn p(&self) -> usize {
        self.beta.len()
    }

    pub fn q(&self) -> usize {
        self.gamma.len()
    }

    pub fn dim(&self) -> usize {
        self.beta.len() + self.gamma.len()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.beta.iter().chain(&self.gamma).copied().collect()
    }
}

/// One subject: observed log time, event indicator and the two covariate
/// vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub log_time: f64,
    pub event: bool,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
}

impl Observation {
    pub fn new(log_time: f64, event: bool, x: Vec<f64>, z: Vec<f64>) -> Result<Self> {
        if !log_time.is_finite() {
            return Err(Error::InvalidInput(format!("log time must be finite, got {log_time}")));
        }
        if x.iter().chain(&z).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("covariates must be finite".into()));
        }
        Ok(Self { log_time, event, x, z })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalDataset {
    observations: Vec<Observation>,
    p: usize,
    q: usize,
}

impl SurvivalDataset {
    pub fn new(observations: Vec<Observation>, p: usize, q: usize) -> Result<Self> {
        if p + q == 0 {
            return Err(Error::InvalidInput("model needs at least one covariate".into()));
        }
        for (i, obs) in observations.iter().enumerate() {
            if obs.x.len() != p || obs.z.len() != q {
                return Err(Error::InvalidInput(format!(
                    "observation {i} has dimensions ({}, {}), expected ({p}, {q})",
                    obs.x.len(),
                    obs.z.len()
                )));
            }
        }
        Ok(Self { observations, p, q })
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn dim(&self) -> usize {
        self.p + self.q
    }

    pub fn n_events(&self) -> usize {
        self.observations.iter().filter(|o| o.event).count()
    }

    pub fn check_theta(&self, theta: &Theta) -> Result<()> {
        if theta.p() != self.p || theta.q() != self.q {
            return Err(Error::InvalidInput(format!(
                "theta has dimensions ({}, {}), data has ({}, {})",
                theta.p(),
                theta.q(),
                self.p,
                self.q
            )));
        }
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

/// `exp(gamma'z)`, i.e. the inverse scale `1 / sigma`.
pub(crate) fn inverse_scale(z: &[f64], gamma: &[f64]) -> Result<f64> {
    let lin = dot(gamma, z);
    if !lin.is_finite() || lin.abs() > MAX_SCALE_EXPONENT {
        return Err(Error::NumericOverflow(format!(
            "|gamma'z| = {} exceeds {MAX_SCALE_EXPONENT}",
            lin.abs()
        )));
    }
    Ok(lin.exp())
}

/// Location and scale `(mu, sigma)` for a covariate pair.
pub fn location_scale(x: &[f64], z: &[f64], theta: &Theta) -> Result<(f64, f64)> {
    if x.len() != theta.p() || z.len() != theta.q() {
        return Err(Error::InvalidInput(format!(
            "covariate dimensions ({}, {}) do not match theta ({}, {})",
            x.len(),
            z.len(),
            theta.p(),
            theta.q()
        )));
    }
    let mu = -dot(&theta.beta, x);
    let sigma = 1.0 / inverse_scale(z, &theta.gamma)?;
    Ok((mu, sigma))
}

pub fn linear_predictors(obs: &Observation, theta: &Theta) -> Result<(f64, f64)> {
    location_scale(&obs.x, &obs.z, theta)
}

/// Standardised residual `exp(gamma'z) (log t + beta'x)`.
pub fn residual(obs: &Observation, theta: &Theta) -> Result<f64> {
    if obs.x.len() != theta.p() || obs.z.len() != theta.q() {
        return Err(Error::InvalidInput("observation and theta dimensions differ".into()));
    }
    let value = inverse_scale(&obs.z, &theta.gamma)? * (obs.log_time + dot(&theta.beta, &obs.x));
    if !value.is_finite() {
        return Err(Error::NumericOverflow(format!("residual is not finite for log time {}", obs.log_time)));
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(log_time: f64, x: &[f64], z: &[f64]) -> Observation {
        Observation::new(log_time, true, x.to_vec(), z.to_vec()).unwrap()
    }

    #[test]
    fn predictors_hand_values() {
        let theta = Theta::new(vec![0.5], vec![0.0]).unwrap();
        assert_eq!(linear_predictors(&obs(0.0, &[2.0], &[1.0]), &theta).unwrap(), (-1.0, 1.0));

        let theta = Theta::new(vec![], vec![2f64.ln()]).unwrap();
        let (mu, sigma) = linear_predictors(&obs(0.0, &[], &[1.0]), &theta).unwrap();
        assert_eq!(mu, 0.0);
        assert!((sigma - 0.5).abs() < 1e-15);

        let theta = Theta::zeros(2, 1);
        assert_eq!(linear_predictors(&obs(0.0, &[3.0, -7.0], &[4.0]), &theta).unwrap(), (0.0, 1.0));
    }

    #[test]
    fn residual_hand_values() {
        let theta = Theta::new(vec![0.5], vec![0.0]).unwrap();
        assert_eq!(residual(&obs(1.0, &[2.0], &[1.0]), &theta).unwrap(), 2.0);

        let theta = Theta::new(vec![-0.5], vec![2f64.ln()]).unwrap();
        assert!(residual(&obs(0.5, &[1.0], &[1.0]), &theta).unwrap().abs() < 1e-15);

        let theta = Theta::zeros(1, 1);
        assert_eq!(residual(&obs(-3.25, &[9.0], &[2.0]), &theta).unwrap(), -3.25);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let theta = Theta::zeros(2, 0);
        assert!(matches!(linear_predictors(&obs(0.0, &[1.0], &[]), &theta), Err(Error::InvalidInput(_))));
        assert!(SurvivalDataset::new(vec![obs(0.0, &[1.0], &[])], 2, 0).is_err());
    }

    #[test]
    fn scale_exponent_guard() {
        let theta = Theta::new(vec![], vec![800.0]).unwrap();
        assert!(matches!(residual(&obs(1.0, &[], &[1.0]), &theta), Err(Error::NumericOverflow(_))));
    }

    #[test]
    fn gamma_zero_gives_aft_residual() {
        let theta = Theta::new(vec![0.3, -1.2], vec![0.0]).unwrap();
        let o = obs(0.7, &[1.5, 2.0], &[5.0]);
        assert_eq!(residual(&o, &theta).unwrap(), 0.7 + (0.3 * 1.5 + -1.2 * 2.0));
    }

    #[test]
    fn zero_theta_shifts_with_log_time() {
        let theta = Theta::zeros(1, 1);
        let c = 0.375;
        let a = residual(&obs(1.25, &[2.0], &[1.0]), &theta).unwrap();
        let b = residual(&obs(1.25 + c, &[2.0], &[1.0]), &theta).unwrap();
        assert_eq!(b - a, c);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn residual_increasing_in_log_time(
                t1 in -5.0f64..5.0, dt in 1e-6f64..3.0,
                b in -3.0f64..3.0, g in -3.0f64..3.0,
                x in -2.0f64..2.0, z in -2.0f64..2.0,
            ) {
                let theta = Theta::new(vec![b], vec![g]).unwrap();
                let lo = residual(&obs(t1, &[x], &[z]), &theta).unwrap();
                let hi = residual(&obs(t1 + dt, &[x], &[z]), &theta).unwrap();
                prop_assert!(hi > lo);
            }
        }
    }
}
