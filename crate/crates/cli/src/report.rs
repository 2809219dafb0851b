//! The `fit.json` artifact and the coefficient table.

use std::f64::consts::FRAC_1_SQRT_2;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use smpr::{joint_test, FitResult, InferenceResult, Tau, WeightSpec};

use crate::data::ColumnMap;
use crate::error::Result;
use crate::output::{opt_float, Table};

/// Everything needed to repeat an analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub input: PathBuf,
    pub columns: ColumnMap,
    pub tau: Tau,
    pub weight: WeightSpec,
    pub m: usize,
    pub level: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    /// `location` or `scale`.
    pub component: String,
    pub covariate: String,
    pub est: f64,
    pub se: f64,
    pub p_value: f64,
    /// Wald test of both coefficients of a covariate that enters location
    /// and scale.
    pub joint_p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HazardRow {
    /// Jump location on the residual scale.
    pub residual: f64,
    pub cumulative: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceReport {
    pub covariance: Vec<Vec<f64>>,
    /// Least-squares slope of the score in the coefficients.
    pub score_slope: Vec<Vec<f64>>,
    pub coefficients: Vec<CoefficientRow>,
    pub hazard: Vec<HazardRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub config: AnalysisConfig,
    pub n: usize,
    pub events: usize,
    pub fit: FitResult,
    /// Absent when the root search did not converge.
    pub inference: Option<InferenceReport>,
}

/// Two-sided normal p-value of `est / se`.
fn p_value(est: f64, se: f64) -> f64 {
    libm::erfc((est / se).abs() * FRAC_1_SQRT_2)
}

fn rows(m: &smpr::inference::Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

pub fn coefficient_rows(
    columns: &ColumnMap,
    fit: &FitResult,
    inference: &InferenceResult,
) -> Result<Vec<CoefficientRow>> {
    let p = columns.x.len();
    let flat = fit.theta_hat.to_flat();
    let se = inference.standard_errors();
    let mut out = Vec::with_capacity(flat.len());
    for (k, (&est, &s)) in flat.iter().zip(&se).enumerate() {
        let (component, covariate) =
            if k < p { ("location", &columns.x[k]) } else { ("scale", &columns.z[k - p]) };
        let partner = if k < p {
            columns.z.iter().position(|c| c == covariate).map(|j| (k, p + j))
        } else {
            columns.x.iter().position(|c| c == covariate).map(|j| (j, k))
        };
        let joint_p_value = partner
            .map(|pair| joint_test(&fit.theta_hat, &inference.theta_cov, pair).map(|(_, pv)| pv))
            .transpose()?;
        out.push(CoefficientRow {
            component: component.into(),
            covariate: covariate.clone(),
            est,
            se: s,
            p_value: p_value(est, s),
            joint_p_value,
        });
    }
    Ok(out)
}

pub fn inference_report(
    columns: &ColumnMap,
    fit: &FitResult,
    inference: &InferenceResult,
) -> Result<InferenceReport> {
    let hazard = fit
        .hazard
        .times()
        .iter()
        .zip(fit.hazard.cumulative())
        .filter_map(|(&t, cumulative)| {
            inference.hazard_variance_at(t).map(|v| HazardRow {
                residual: t,
                cumulative,
                se: v.max(0.0).sqrt(),
            })
        })
        .collect();
    Ok(InferenceReport {
        covariance: rows(&inference.theta_cov),
        score_slope: rows(&inference.psi_dot),
        coefficients: coefficient_rows(columns, fit, inference)?,
        hazard,
    })
}

pub fn coefficient_table(rows: &[CoefficientRow]) -> Table {
    let mut table = Table::new(&["component", "covariate", "est", "se", "p_value", "joint_p_value"]);
    for r in rows {
        table.row([
            r.component.clone(),
            r.covariate.clone(),
            opt_float(Some(r.est)),
            opt_float(Some(r.se)),
            opt_float(Some(r.p_value)),
            opt_float(r.joint_p_value),
        ]);
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p_values() {
        assert!((p_value(1.959963984540054, 1.0) - 0.05).abs() < 1e-12);
        assert_eq!(p_value(0.0, 1.0), 1.0);
        assert_eq!(p_value(-2.0, 1.0), p_value(2.0, 1.0));
    }
}
