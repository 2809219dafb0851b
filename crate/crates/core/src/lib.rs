//! Semiparametric location-scale survival regression.
//!
//! The model is `log T = mu + sigma * e` with `mu = -beta'x`,
//! `sigma = exp(-gamma'z)` and an error distribution whose cumulative hazard
//! is left unspecified. Coefficients are estimated from weighted rank
//! estimating equations, the error hazard by a Nelson–Aalen type estimator on
//! the residual scale, and uncertainty by Gaussian perturbation of the
//! estimating equations plus conditional multipliers.

// `!(x > 0.0)` style checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Tests compare against published rounded values and long reference digits.
#![cfg_attr(test, allow(clippy::approx_constant, clippy::excessive_precision, clippy::needless_range_loop))]

pub mod error;
pub mod estimator;
pub mod functionals;
pub mod inference;
mod linalg;
pub mod model;
pub mod simharness;
pub mod solver;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use estimator::{
    nelson_aalen, objective, risk_summary, score, EstimatorConfig, RiskSummary, StepCurve, StepHazard, Tau,
    WeightSpec,
};
pub use functionals::{
    conditional_quantile, conditional_survivor, functional_band, kaplan_meier, log_quantile_ratio,
    quantile_ratio, Band, CovariateProfile, ModelState,
};
pub use inference::{
    analyze, joint_test, log_wald_ci, wald_ci, InferenceConfig, InferenceResult, MultiplierDraws,
};
pub use model::{Observation, SurvivalDataset, Theta};
pub use simharness::{run_study, Scenario, StudySummary};
pub use solver::{fit, FitResult, SolverConfig};
