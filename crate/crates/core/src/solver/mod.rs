//! Root search for the estimating equations. The score is a step function of
//! the coefficients, so `||score||` is minimized by a derivative-free simplex
//! search.
//!
//! A single simplex run easily stalls on a plateau next to a narrow dip of
//! the objective. Each pass therefore restarts the simplex at the incumbent
//! with edges growing geometrically up to `initial_step` and alternating in
//! orientation; passes repeat until one brings no improvement. Small edges
//! come first so the search settles on the root nearest the start before
//! wider simplices probe further out.
//!
//! With scale coefficients the equations also have spurious near-roots far
//! from the consistent one, sometimes with a smaller objective. The default
//! schedule is therefore local and meant to start from [`normal_pilot`].

pub mod nelder_mead;
mod pilot;

pub use pilot::normal_pilot;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{nelson_aalen, objective, EstimatorConfig, StepHazard};
use crate::model::{SurvivalDataset, Theta};
use nelder_mead::{minimize, SearchOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub initial: Theta,
    /// Iteration cap for each simplex run (the first run and every restart).
    pub max_iterations: usize,
    /// Convergence threshold on simplex diameter, and relative threshold on
    /// the objective.
    pub tolerance: f64,
    /// Restarts per pass after the first run.
    pub restarts: usize,
    pub initial_step: f64,
    /// Ratio between consecutive restart edges.
    pub restart_shrink: f64,
    /// Cap on the number of passes over the restart schedule.
    pub max_passes: usize,
}

impl SolverConfig {
    pub fn new(initial: Theta) -> Self {
        Self {
            initial,
            max_iterations: 2000,
            tolerance: 1e-6,
            restarts: 3,
            initial_step: 0.1,
            restart_shrink: 0.5,
            max_passes: 4,
        }
    }

    /// Wide restart schedule for objectives without spurious roots, such as
    /// location-only models, where the main hazard is stalling on a plateau.
    pub fn exploratory(initial: Theta) -> Self {
        Self { restarts: 10, initial_step: 0.5, restart_shrink: 0.6, ..Self::new(initial) }
    }

    /// Defaults starting from the censored normal pilot fit.
    pub fn from_pilot(data: &SurvivalDataset) -> Result<Self> {
        normal_pilot(data).map(Self::new)
    }

    /// Defaults starting from `theta = 0`.
    pub fn zeros(p: usize, q: usize) -> Self {
        Self::new(Theta::zeros(p, q))
    }

    fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidInput("max_iterations must be >= 1".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidInput("tolerance must be positive".into()));
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return Err(Error::InvalidInput("initial_step must be positive".into()));
        }
        if !(self.restart_shrink > 0.0 && self.restart_shrink <= 1.0) {
            return Err(Error::InvalidInput("restart_shrink must lie in (0, 1]".into()));
        }
        if self.max_passes == 0 {
            return Err(Error::InvalidInput("max_passes must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub theta_hat: Theta,
    /// Hazard estimator evaluated at `theta_hat`.
    pub hazard: StepHazard,
    pub objective_value: f64,
    pub converged: bool,
    pub diagnostic: Option<String>,
    pub estimator: EstimatorConfig,
    pub solver: SolverConfig,
    pub n: usize,
    pub iterations: usize,
    pub evaluations: usize,
}

pub fn fit(data: &SurvivalDataset, cfg: &EstimatorConfig, solver: &SolverConfig) -> Result<FitResult> {
    solver.validate()?;
    data.check_theta(&solver.initial)?;
    let dim = data.dim();
    if data.len() < dim + 1 {
        return Err(Error::InvalidInput(format!(
            "need at least {} observations for {dim} coefficients, got {}",
            dim + 1,
            data.len()
        )));
    }
    if data.n_events() == 0 {
        return Err(Error::InvalidInput("data contain no events".into()));
    }

    let p = data.p();
    let f = |x: &[f64]| -> f64 {
        Theta::from_flat(x, p).and_then(|theta| objective(data, &theta, cfg)).unwrap_or(f64::INFINITY)
    };

    let start = solver.initial.to_flat();
    let initial_value = objective(data, &solver.initial, cfg)?;
    let target = solver.tolerance * initial_value.max(1.0);

    let mut best_point = start.clone();
    let mut best_value = initial_value;
    let mut iterations = 0;
    let mut evaluations = 1;
    let mut collapsed = false;

    let schedule: Vec<f64> = (0..=solver.restarts)
        .rev()
        .map(|r| {
            let edge = solver.initial_step * solver.restart_shrink.powi(r as i32);
            if r % 2 == 0 {
                edge
            } else {
                -edge
            }
        })
        .collect();
    let mut passes = 0;
    while best_value > target && passes < solver.max_passes {
        passes += 1;
        let mut improved = false;
        for &step in &schedule {
            let run = minimize(
                f,
                &best_point,
                &SearchOptions {
                    initial_step: step,
                    diameter_tolerance: solver.tolerance,
                    value_target: target,
                    max_iterations: solver.max_iterations,
                },
            );
            iterations += run.iterations;
            evaluations += run.evaluations;
            collapsed = run.collapsed;
            if run.value < best_value {
                best_value = run.value;
                best_point = run.point;
                improved = true;
            }
            if best_value <= target {
                break;
            }
        }
        if !improved {
            break;
        }
    }

    let converged = best_value <= target || collapsed;
    let diagnostic = (!converged).then(|| {
        format!(
            "simplex did not collapse below {} within {} iterations per run; best objective {best_value:e}",
            solver.tolerance, solver.max_iterations
        )
    });
    let theta_hat = Theta::from_flat(&best_point, p)?;
    let hazard = nelson_aalen(data, &theta_hat, cfg.tau)?;
    Ok(FitResult {
        theta_hat,
        hazard,
        objective_value: best_value,
        converged,
        diagnostic,
        estimator: *cfg,
        solver: solver.clone(),
        n: data.len(),
        iterations,
        evaluations,
    })
}
