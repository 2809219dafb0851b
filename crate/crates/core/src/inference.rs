//! Resampling inference for the fitted coefficients and hazard.
//!
//! The slope of the estimating function and of the hazard functional are
//! estimated by least squares on Gaussian perturbations of the estimate,
//! re-evaluating (never re-solving) the equations. Combined with per-subject
//! influence terms this gives plug-in covariances, and conditional Gaussian
//! multipliers give joint draws of coefficients and hazard for any
//! functional of the two.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::estimator::{EstimatorConfig, RiskTable, StepCurve};
use crate::linalg::{invert, symmetrize};
use crate::model::{SurvivalDataset, Theta};
use crate::solver::FitResult;

pub type Matrix = DMatrix<f64>;

/// Default number of perturbation and multiplier draws.
pub const DEFAULT_DRAWS: usize = 1000;

/// Gaussian perturbation directions, one `(p+q)`-vector per row.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSet {
    g: DMatrix<f64>,
}

impl PerturbationSet {
    pub fn generate<R: Rng + ?Sized>(m: usize, dim: usize, rng: &mut R) -> Self {
        Self { g: standard_normal_matrix(m, dim, rng) }
    }

    pub fn from_matrix(g: DMatrix<f64>) -> Self {
        Self { g }
    }

    pub fn m(&self) -> usize {
        self.g.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.g
    }
}

/// `m x cols` matrix of iid standard normals, filled row by row.
pub fn standard_normal_matrix<R: Rng + ?Sized>(m: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    let values: Vec<f64> = (0..m * cols).map(|_| rng.sample(StandardNormal)).collect();
    DMatrix::from_row_slice(m, cols, &values)
}

/// Per-subject influence terms at the estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluencePieces {
    /// `n x (p+q)`; row `i` is the coefficient influence of subject `i`.
    pub j: DMatrix<f64>,
    /// Evaluation points for the hazard influence.
    pub grid: Vec<f64>,
    /// `n x grid`; column `k` holds the hazard influence at `grid[k]`.
    pub h: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierDraws {
    /// `m x (p+q)`, one resampled coefficient vector per row.
    pub theta_b: DMatrix<f64>,
    /// `m x grid`, resampled hazard values.
    pub hazard_b: DMatrix<f64>,
    pub grid: Vec<f64>,
    /// Requested points dropped because the fitted hazard is zero there.
    pub excluded: Vec<f64>,
    p: usize,
}

impl MultiplierDraws {
    pub fn m(&self) -> usize {
        self.theta_b.nrows()
    }

    pub fn theta(&self, b: usize) -> Theta {
        let row: Vec<f64> = self.theta_b.row(b).iter().copied().collect();
        Theta { beta: row[..self.p].to_vec(), gamma: row[self.p..].to_vec() }
    }

    pub fn hazard_curve(&self, b: usize) -> StepCurve {
        StepCurve::new(self.grid.clone(), self.hazard_b.row(b).iter().copied().collect())
            .expect("grid is strictly increasing")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InferenceConfig {
    pub m: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct InferenceResult {
    pub grid: Vec<f64>,
    pub psi_dot: DMatrix<f64>,
    pub theta_cov: DMatrix<f64>,
    /// `(p+q) x grid`; column `k` is the hazard slope at `grid[k]`.
    pub phi_dot: DMatrix<f64>,
    pub hazard_var: Vec<f64>,
    pub pieces: InfluencePieces,
    pub draws: MultiplierDraws,
}

impl InferenceResult {
    pub fn standard_errors(&self) -> Vec<f64> {
        self.theta_cov.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect()
    }

    pub fn hazard_variance_at(&self, t: f64) -> Option<f64> {
        self.grid.iter().position(|&g| g == t).map(|k| self.hazard_var[k])
    }
}

fn check_grid(grid: &[f64], fit: &FitResult) -> Result<()> {
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("grid must be strictly increasing".into()));
    }
    if let Some(&t) = grid.iter().find(|&&t| !fit.estimator.tau.admits(t)) {
        return Err(Error::InvalidInput(format!("grid point {t} lies beyond tau = {}", fit.estimator.tau)));
    }
    Ok(())
}

/// Jump points of the fitted hazard merged with `extra` points, sorted,
/// deduplicated and restricted to `<= tau`.
pub fn analysis_grid(fit: &FitResult, extra: &[f64]) -> Vec<f64> {
    let mut grid: Vec<f64> = fit
        .hazard
        .times()
        .iter()
        .chain(extra)
        .copied()
        .filter(|&t| t.is_finite() && fit.estimator.tau.admits(t))
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

struct Jump {
    value: f64,
    increment: f64,
    fraction: f64,
    rho: Vec<f64>,
    mean: Vec<f64>,
}

pub fn influence_pieces(data: &SurvivalDataset, fit: &FitResult, grid: &[f64]) -> Result<InfluencePieces> {
    check_grid(grid, fit)?;
    let cfg = fit.estimator;
    let table = RiskTable::build(data, &fit.theta_hat)?;
    let (n, dim) = (table.n(), table.dim());

    let jumps: Vec<Jump> = table
        .jump_levels(cfg.tau)
        .map(|l| Jump {
            value: table.level_value(l),
            increment: table.level_events(l) as f64 / table.level_at_risk(l) as f64,
            fraction: table.level_fraction(l),
            rho: table.weight_diagonal(&cfg, l),
            mean: table.level_mean(l).to_vec(),
        })
        .collect();

    // Running sums over jumps: sum dA rho, sum dA rho * eta, sum dA / D0.
    let mut rho_sum = vec![vec![0.0; dim]; jumps.len() + 1];
    let mut rho_mean_sum = vec![vec![0.0; dim]; jumps.len() + 1];
    let mut inverse_risk_sum = vec![0.0; jumps.len() + 1];
    for (k, jump) in jumps.iter().enumerate() {
        for c in 0..dim {
            rho_sum[k + 1][c] = rho_sum[k][c] + jump.increment * jump.rho[c];
            rho_mean_sum[k + 1][c] = rho_mean_sum[k][c] + jump.increment * jump.rho[c] * jump.mean[c];
        }
        inverse_risk_sum[k + 1] = inverse_risk_sum[k] + jump.increment / jump.fraction;
    }
    let jumps_upto = |t: f64| jumps.partition_point(|j| j.value <= t);

    let mut j = DMatrix::zeros(n, dim);
    for i in 0..n {
        let psi = table.psi(&cfg, i);
        let k = jumps_upto(table.residual(i));
        let feature = table.feature(i);
        for c in 0..dim {
            j[(i, c)] = psi[c] - (rho_sum[k][c] * feature[c] - rho_mean_sum[k][c]);
        }
    }

    let mut h = DMatrix::zeros(n, grid.len());
    for (col, &t) in grid.iter().enumerate() {
        table.level_at(t)?;
        for i in 0..n {
            let eps = table.residual(i);
            let counting =
                if table.event(i) && eps <= t { 1.0 / table.level_fraction(table.level_of(i)) } else { 0.0 };
            h[(i, col)] = counting - inverse_risk_sum[jumps_upto(t.min(eps))];
        }
    }

    Ok(InfluencePieces { j, grid: grid.to_vec(), h })
}

/// `(M'M)^{-1} M'` for the perturbation design.
fn least_squares_operator(perturb: &PerturbationSet) -> Result<DMatrix<f64>> {
    let g = perturb.matrix();
    if g.nrows() < g.ncols() + 1 {
        return Err(Error::ResamplingDegenerate(format!(
            "{} perturbations for {} coefficients; need at least {}",
            g.nrows(),
            g.ncols(),
            g.ncols() + 1
        )));
    }
    let gram = g.transpose() * g;
    let inv = invert(&gram).map_err(|e| Error::ResamplingDegenerate(e.to_string()))?;
    Ok(inv * g.transpose())
}

fn perturbed_theta(fit: &FitResult, direction: &[f64], scale: f64) -> Result<Theta> {
    let flat: Vec<f64> = fit.theta_hat.to_flat().iter().zip(direction).map(|(t, g)| t + g / scale).collect();
    Theta::from_flat(&flat, fit.theta_hat.p())
}

/// Scores and hazard values at `theta_hat + G_b / sqrt(n)` for every row
/// `b`, scaled by `sqrt(n)`; the hazard rows are differences from the fit.
fn perturbed_evaluations(
    data: &SurvivalDataset,
    fit: &FitResult,
    cfg: &EstimatorConfig,
    perturb: &PerturbationSet,
    grid: Option<&[f64]>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let dim = data.dim();
    let root_n = (data.len() as f64).sqrt();
    let fitted_curve = fit.hazard.curve();
    let fitted: Vec<f64> = grid.unwrap_or(&[]).iter().map(|&t| fitted_curve.value(t)).collect();
    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..perturb.m())
        .into_par_iter()
        .map(|b| {
            let direction: Vec<f64> = perturb.matrix().row(b).iter().copied().collect();
            let theta = perturbed_theta(fit, &direction, root_n)?;
            let table = RiskTable::build(data, &theta)?;
            let score: Vec<f64> = table.score(cfg).iter().map(|s| s * root_n).collect();
            let hazard = match grid {
                Some(points) => {
                    let curve = table.hazard(cfg.tau).curve();
                    points.iter().zip(&fitted).map(|(&t, a)| root_n * (curve.value(t) - a)).collect()
                }
                None => Vec::new(),
            };
            Ok((score, hazard))
        })
        .collect::<Result<_>>()?;
    let m = perturb.m();
    let width = grid.map_or(0, <[f64]>::len);
    let u = DMatrix::from_fn(m, dim, |b, c| rows[b].0[c]);
    let u_tilde = DMatrix::from_fn(m, width, |b, k| rows[b].1[k]);
    Ok((u, u_tilde))
}

/// Slope `D` of the least-squares fit `responses[b] ~ D G_b`, with one
/// response vector per row.
pub fn regression_slope(perturb: &PerturbationSet, responses: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if responses.nrows() != perturb.m() {
        return Err(Error::InvalidInput(format!(
            "{} response rows for {} perturbations",
            responses.nrows(),
            perturb.m()
        )));
    }
    Ok((least_squares_operator(perturb)? * responses).transpose())
}

/// Least-squares slope of the estimating function at the estimate.
pub fn estimate_psi_dot(
    data: &SurvivalDataset,
    fit: &FitResult,
    perturb: &PerturbationSet,
    cfg: &EstimatorConfig,
) -> Result<DMatrix<f64>> {
    let (u, _) = perturbed_evaluations(data, fit, cfg, perturb, None)?;
    regression_slope(perturb, &u)
}

/// Least-squares slope of the hazard estimator in the coefficients, one
/// column per grid point.
pub fn estimate_phi_dot(
    data: &SurvivalDataset,
    fit: &FitResult,
    perturb: &PerturbationSet,
    grid: &[f64],
) -> Result<DMatrix<f64>> {
    check_grid(grid, fit)?;
    let operator = least_squares_operator(perturb)?;
    let (_, u_tilde) = perturbed_evaluations(data, fit, &fit.estimator, perturb, Some(grid))?;
    Ok(operator * u_tilde)
}

/// Rows `psi_dot^{-1} J_i`, as an `n x (p+q)` matrix.
fn standardized_influence(pieces: &InfluencePieces, psi_dot: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let inv = invert(psi_dot)?;
    Ok(&pieces.j * inv.transpose())
}

/// Covariance of the coefficient estimate, `n^{-2} sum (psi_dot^{-1} J_i)^{x2}`.
pub fn theta_covariance(pieces: &InfluencePieces, psi_dot: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = standardized_influence(pieces, psi_dot)?;
    let n = k.nrows() as f64;
    Ok(symmetrize(&(k.transpose() * &k)) / (n * n))
}

/// `n x grid` matrix of combined hazard influence
/// `-phi_dot(t) psi_dot^{-1} J_i + H_i(t)`.
fn hazard_influence(
    pieces: &InfluencePieces,
    psi_dot: &DMatrix<f64>,
    phi_dot: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    if phi_dot.ncols() != pieces.grid.len() {
        return Err(Error::InvalidInput("phi_dot and influence grid differ in length".into()));
    }
    let k = standardized_influence(pieces, psi_dot)?;
    Ok(&pieces.h - k * phi_dot)
}

/// Variance of the hazard estimate at every grid point.
pub fn hazard_variance(
    pieces: &InfluencePieces,
    psi_dot: &DMatrix<f64>,
    phi_dot: &DMatrix<f64>,
) -> Result<Vec<f64>> {
    let l = hazard_influence(pieces, psi_dot, phi_dot)?;
    let n = l.nrows() as f64;
    Ok(l.column_iter().map(|col| col.iter().map(|v| v * v).sum::<f64>() / (n * n)).collect())
}

/// Joint coefficient and hazard draws from shared multipliers: row `b` of
/// `multipliers` (an `n`-vector) drives both the coefficient and the hazard
/// draw `b`.
pub fn multiplier_draws(
    pieces: &InfluencePieces,
    fit: &FitResult,
    psi_dot: &DMatrix<f64>,
    phi_dot: &DMatrix<f64>,
    multipliers: &DMatrix<f64>,
) -> Result<MultiplierDraws> {
    let n = pieces.j.nrows();
    if multipliers.ncols() != n {
        return Err(Error::InvalidInput(format!(
            "multipliers have {} columns for {n} subjects",
            multipliers.ncols()
        )));
    }
    let nf = n as f64;
    let k = standardized_influence(pieces, psi_dot)?;
    let l = hazard_influence(pieces, psi_dot, phi_dot)?;

    let theta_hat = DVector::from_vec(fit.theta_hat.to_flat());
    let shift = multipliers * &k / nf;
    let mut theta_b = shift.clone();
    for (b, mut row) in theta_b.row_iter_mut().enumerate() {
        for c in 0..row.len() {
            row[c] = theta_hat[c] - shift[(b, c)];
        }
    }

    let curve = fit.hazard.curve();
    let (kept, excluded): (Vec<usize>, Vec<usize>) =
        (0..pieces.grid.len()).partition(|&c| curve.value(pieces.grid[c]) > 0.0);
    let grid: Vec<f64> = kept.iter().map(|&c| pieces.grid[c]).collect();
    let fitted: Vec<f64> = grid.iter().map(|&t| curve.value(t)).collect();
    let l_kept = l.select_columns(&kept);
    let exponent = multipliers * l_kept / nf;
    let hazard_b = DMatrix::from_fn(multipliers.nrows(), grid.len(), |b, c| {
        fitted[c] * (exponent[(b, c)] / fitted[c]).exp()
    });

    Ok(MultiplierDraws {
        theta_b,
        hazard_b,
        grid,
        excluded: excluded.iter().map(|&c| pieces.grid[c]).collect(),
        p: fit.theta_hat.p(),
    })
}

/// Full inference at a fit: perturbation slopes, covariances and multiplier
/// draws on `analysis_grid(fit, extra_points)`.
///
/// Both Gaussian families come from one stream seeded by `cfg.seed`: first
/// the `m x (p+q)` perturbations, then the `m x n` multipliers.
pub fn analyze(
    data: &SurvivalDataset,
    fit: &FitResult,
    extra_points: &[f64],
    cfg: &InferenceConfig,
) -> Result<InferenceResult> {
    let grid = analysis_grid(fit, extra_points);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let perturb = PerturbationSet::generate(cfg.m, data.dim(), &mut rng);
    let multipliers = standard_normal_matrix(cfg.m, data.len(), &mut rng);

    let operator = least_squares_operator(&perturb)?;
    let (u, u_tilde) = perturbed_evaluations(data, fit, &fit.estimator, &perturb, Some(&grid))?;
    let psi_dot = (&operator * u).transpose();
    let phi_dot = &operator * u_tilde;

    let pieces = influence_pieces(data, fit, &grid)?;
    let theta_cov = theta_covariance(&pieces, &psi_dot)?;
    let hazard_var = hazard_variance(&pieces, &psi_dot, &phi_dot)?;
    let draws = multiplier_draws(&pieces, fit, &psi_dot, &phi_dot, &multipliers)?;
    Ok(InferenceResult { grid, psi_dot, theta_cov, phi_dot, hazard_var, pieces, draws })
}

fn normal_quantile(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidInput(format!("level {level} not in (0, 1)")));
    }
    Ok(Normal::standard().inverse_cdf((1.0 + level) / 2.0))
}

/// Symmetric normal-theory interval `estimate +- z sqrt(variance)`.
pub fn wald_ci(estimate: f64, variance: f64, level: f64) -> Result<(f64, f64)> {
    if !(variance >= 0.0) {
        return Err(Error::InvalidInput(format!("negative variance {variance}")));
    }
    let half = normal_quantile(level)? * variance.sqrt();
    Ok((estimate - half, estimate + half))
}

/// Interval built on the log scale and mapped back, for positive quantities
/// such as a cumulative hazard.
pub fn log_wald_ci(estimate: f64, variance: f64, level: f64) -> Result<(f64, f64)> {
    if !(estimate > 0.0) {
        return Err(Error::InvalidInput(format!(
            "log-scale interval needs a positive estimate, got {estimate}"
        )));
    }
    let (lo, hi) = wald_ci(estimate.ln(), variance / (estimate * estimate), level)?;
    Ok((lo.exp(), hi.exp()))
}

/// Wald chi-square test (2 df) that the coefficients at `indices` (positions
/// in the flat `(beta, gamma)` vector) are both zero.
pub fn joint_test(
    theta_hat: &Theta,
    theta_cov: &DMatrix<f64>,
    indices: (usize, usize),
) -> Result<(f64, f64)> {
    let flat = theta_hat.to_flat();
    let (a, b) = indices;
    if a >= flat.len() || b >= flat.len() || a == b {
        return Err(Error::InvalidInput(format!("invalid index pair ({a}, {b})")));
    }
    let sub = DMatrix::from_row_slice(
        2,
        2,
        &[theta_cov[(a, a)], theta_cov[(a, b)], theta_cov[(b, a)], theta_cov[(b, b)]],
    );
    let inv = invert(&sub)?;
    let v = DVector::from_row_slice(&[flat[a], flat[b]]);
    let statistic = (v.transpose() * inv * &v)[(0, 0)];
    Ok((statistic, (-statistic / 2.0).exp()))
}
