use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::model::{Observation, SurvivalDataset};

/// Random right-censored dataset with `p` location and `q` scale covariates.
/// `rounding` > 0 rounds log times to that grid to force ties.
pub(crate) fn random_dataset(seed: u64, n: usize, p: usize, q: usize, rounding: f64) -> SurvivalDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let obs = (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
            let z: Vec<f64> = (0..q).map(|_| rng.random_range(-1.0..1.0)).collect();
            let e: f64 = rng.sample(StandardNormal);
            let mut log_time = e + 0.5 * x.first().copied().unwrap_or(0.0);
            if rounding > 0.0 {
                log_time = (log_time / rounding).round() * rounding;
            }
            let event = rng.random_bool(0.75);
            Observation::new(log_time, event, x, z).unwrap()
        })
        .collect();
    SurvivalDataset::new(obs, p, q).unwrap()
}

pub(crate) fn dataset(rows: &[(f64, bool, &[f64], &[f64])]) -> SurvivalDataset {
    let p = rows[0].2.len();
    let q = rows[0].3.len();
    let obs =
        rows.iter().map(|(t, d, x, z)| Observation::new(*t, *d, x.to_vec(), z.to_vec()).unwrap()).collect();
    SurvivalDataset::new(obs, p, q).unwrap()
}

/// A fit record pinned at `theta` without solving, for checks that hold at
/// any parameter value.
pub(crate) fn fit_at(
    data: &SurvivalDataset,
    theta: &crate::model::Theta,
    cfg: &crate::estimator::EstimatorConfig,
) -> crate::solver::FitResult {
    crate::solver::FitResult {
        theta_hat: theta.clone(),
        hazard: crate::estimator::nelson_aalen(data, theta, cfg.tau).unwrap(),
        objective_value: crate::estimator::objective(data, theta, cfg).unwrap(),
        converged: true,
        diagnostic: None,
        estimator: *cfg,
        solver: crate::solver::SolverConfig::new(theta.clone()),
        n: data.len(),
        iterations: 0,
        evaluations: 0,
    }
}
