//! Monte Carlo study of the estimator under a two-covariate design.
//!
//! Subjects have `X1 ~ Bernoulli(0.5)` and `X2 ~ Uniform(0, 1)`, location
//! covariates `x = (X1, X2)`, scale covariate `z = X1` (or none), standard
//! normal errors, and log-normal censoring with unit scale whose location is
//! calibrated to a target censored fraction. Each replicate is fitted, run
//! through the resampling inference, and scored on six quantities: the three
//! coefficients, the error cumulative hazard at zero, the survivor function of
//! profile `x = (1, 1), z = 1` at its true median, and the median ratio of
//! that profile to `x = (0, 1), z = 0`.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{EstimatorConfig, Tau, WeightSpec};
use crate::functionals::{
    conditional_survivor, functional_band, quantile_ratio, CovariateProfile, ModelState,
};
use crate::inference::{analyze, log_wald_ci, wald_ci, InferenceConfig};
use crate::model::{Observation, SurvivalDataset, Theta};
use crate::solver::{fit, SolverConfig};

/// Monte Carlo draws used to calibrate the censoring location.
pub const CALIBRATION_DRAWS: usize = 1_000_000;
/// Largest tolerated fraction of failed replicates.
pub const MAX_FAILURE_FRACTION: f64 = 0.05;
const NOMINAL_LEVEL: f64 = 0.95;
const CALIBRATION_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub n: usize,
    pub theta_true: Theta,
    /// Target censored fraction; 0 disables censoring.
    pub censor_target: f64,
    pub tau: Tau,
    pub weight: WeightSpec,
    pub replicates: usize,
    pub m: usize,
    pub seed: u64,
}

impl Scenario {
    /// The reference design with `theta = (1, 1, 1)`, 500 replicates and
    /// `m = 1000`.
    pub fn reference(n: usize, censor_target: f64, tau: Tau, weight: WeightSpec, seed: u64) -> Self {
        Self {
            n,
            theta_true: Theta::new(vec![1.0, 1.0], vec![1.0]).expect("finite"),
            censor_target,
            tau,
            weight,
            replicates: 500,
            m: 1000,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta_true.p() != 2 || self.theta_true.q() > 1 {
            return Err(Error::InvalidInput(format!(
                "design has 2 location and at most 1 scale coefficients, got ({}, {})",
                self.theta_true.p(),
                self.theta_true.q()
            )));
        }
        if !(0.0..1.0).contains(&self.censor_target) {
            return Err(Error::InvalidInput(format!("censor_target {} not in [0, 1)", self.censor_target)));
        }
        let dim = self.theta_true.dim();
        if self.n < dim + 1 {
            return Err(Error::InvalidInput(format!("n must be at least {}", dim + 1)));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidInput("replicates must be >= 1".into()));
        }
        if self.m < dim + 1 {
            return Err(Error::InvalidInput(format!("m must be at least {}", dim + 1)));
        }
        Ok(())
    }

    pub fn estimator(&self) -> EstimatorConfig {
        EstimatorConfig { tau: self.tau, weight: self.weight }
    }

    fn profile(&self, x1: f64) -> CovariateProfile {
        let z = if self.theta_true.q() == 1 { vec![x1] } else { vec![] };
        CovariateProfile::new(vec![x1, 1.0], z).expect("finite")
    }

    /// `x = (1, 1)`, `z = 1`.
    pub fn first_profile(&self) -> CovariateProfile {
        self.profile(1.0)
    }

    /// `x = (0, 1)`, `z = 0`.
    pub fn second_profile(&self) -> CovariateProfile {
        self.profile(0.0)
    }

    fn replicate_rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    /// Covariates, scale covariates and log event time for one subject.
    fn draw_subject<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, Vec<f64>, f64) {
        let x1 = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
        let x2: f64 = rng.random();
        let e: f64 = rng.sample(StandardNormal);
        let x = vec![x1, x2];
        let z = if self.theta_true.q() == 1 { vec![x1] } else { vec![] };
        let beta = &self.theta_true.beta;
        let mu = -(beta[0] * x1 + beta[1] * x2);
        let log_sigma = -self.theta_true.gamma.iter().zip(&z).map(|(g, v)| g * v).sum::<f64>();
        (x, z, mu + log_sigma.exp() * e)
    }
}

/// Censoring location `c` such that `P(log C < log T) = censor_target` with
/// `log C ~ N(c, 1)`; `None` when there is no censoring.
///
/// `P(log T - Z > c)` is estimated from `CALIBRATION_DRAWS` simulated values
/// of `log T - Z`, `Z ~ N(0, 1)`; its root in `c` is the empirical
/// `1 - censor_target` quantile of those values.
pub fn calibrate_censoring(scenario: &Scenario) -> Result<Option<f64>> {
    scenario.validate()?;
    if scenario.censor_target == 0.0 {
        return Ok(None);
    }
    let mut rng = scenario.replicate_rng(CALIBRATION_STREAM);
    let mut margins: Vec<f64> = (0..CALIBRATION_DRAWS)
        .map(|_| {
            let (_, _, log_t) = scenario.draw_subject(&mut rng);
            let noise: f64 = rng.sample(StandardNormal);
            log_t - noise
        })
        .collect();
    margins.sort_by(f64::total_cmp);
    let k = ((1.0 - scenario.censor_target) * CALIBRATION_DRAWS as f64).ceil() as usize;
    Ok(Some(margins[k.clamp(1, CALIBRATION_DRAWS) - 1]))
}

/// Dataset for replicate `index`, from its own random stream.
pub fn generate_dataset(
    scenario: &Scenario,
    censoring: Option<f64>,
    index: usize,
) -> Result<SurvivalDataset> {
    scenario.validate()?;
    let mut rng = scenario.replicate_rng(index as u64);
    generate_with(scenario, censoring, &mut rng)
}

fn generate_with<R: Rng + ?Sized>(
    scenario: &Scenario,
    censoring: Option<f64>,
    rng: &mut R,
) -> Result<SurvivalDataset> {
    let observations = (0..scenario.n)
        .map(|_| {
            let (x, z, log_t) = scenario.draw_subject(rng);
            let (log_time, event) = match censoring {
                Some(location) => {
                    let log_c = location + rng.sample::<f64, _>(StandardNormal);
                    if log_t <= log_c {
                        (log_t, true)
                    } else {
                        (log_c, false)
                    }
                }
                None => (log_t, true),
            };
            Observation::new(log_time, event, x, z)
        })
        .collect::<Result<Vec<_>>>()?;
    SurvivalDataset::new(observations, 2, scenario.theta_true.q())
}

/// Names of the summarized quantities, in output order.
pub fn quantity_names(q: usize) -> Vec<&'static str> {
    let mut names = vec!["beta1", "beta2"];
    if q == 1 {
        names.push("gamma1");
    }
    names.extend(["A(0)", "S", "r"]);
    names
}

/// True values of the summarized quantities, in `quantity_names` order.
pub fn truths(scenario: &Scenario) -> Vec<f64> {
    let mut out = scenario.theta_true.to_flat();
    let (mu1, _) = crate::model::location_scale(
        &scenario.first_profile().x,
        &scenario.first_profile().z,
        &scenario.theta_true,
    )
    .expect("finite");
    let (mu2, _) = crate::model::location_scale(
        &scenario.second_profile().x,
        &scenario.second_profile().z,
        &scenario.theta_true,
    )
    .expect("finite");
    // Standard normal errors: A(0) = -log(1/2) and the baseline median is 1.
    out.extend([std::f64::consts::LN_2, 0.5, (mu1 - mu2).exp()]);
    out
}

/// One quantity from one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub see: f64,
    pub covered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub index: usize,
    pub censored_fraction: f64,
    /// Estimates in `quantity_names` order, or the reason the replicate
    /// failed.
    pub estimates: std::result::Result<Vec<Estimate>, String>,
}

fn sample_sd(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
}

type Functional<'a> = Box<dyn Fn(&ModelState) -> Result<f64> + Sync + 'a>;

fn estimate_replicate(scenario: &Scenario, data: &SurvivalDataset, seed: u64) -> Result<Vec<Estimate>> {
    let truth = truths(scenario);
    let solver = SolverConfig::from_pilot(data)?;
    let fitted = fit(data, &scenario.estimator(), &solver)?;
    if !fitted.converged {
        return Err(Error::NotConverged(fitted.diagnostic.unwrap_or_default()));
    }
    let inference = analyze(data, &fitted, &[0.0], &InferenceConfig { m: scenario.m, seed })?;

    let mut out = Vec::with_capacity(truth.len());
    let flat = fitted.theta_hat.to_flat();
    for (k, &value) in flat.iter().enumerate() {
        let variance = inference.theta_cov[(k, k)];
        let (lo, hi) = wald_ci(value, variance, NOMINAL_LEVEL)?;
        out.push(Estimate { value, see: variance.sqrt(), covered: lo <= truth[k] && truth[k] <= hi });
    }

    let hazard_at_zero = fitted.hazard.value(0.0);
    let variance = inference
        .hazard_variance_at(0.0)
        .ok_or_else(|| Error::InvalidInput("zero is not on the inference grid".into()))?;
    let (lo, hi) = log_wald_ci(hazard_at_zero, variance, NOMINAL_LEVEL)?;
    let a_truth = truth[flat.len()];
    out.push(Estimate {
        value: hazard_at_zero,
        see: variance.sqrt(),
        covered: lo <= a_truth && a_truth <= hi,
    });

    let state = ModelState::from_fit(&fitted);
    let draws = ModelState::from_draws(&inference.draws, fitted.estimator.tau);
    let (first, second) = (scenario.first_profile(), scenario.second_profile());
    let (mu1, _) = crate::model::location_scale(&first.x, &first.z, &scenario.theta_true)?;
    let true_median = mu1.exp();
    let functionals: [(Functional, f64); 2] = [
        (Box::new(|s: &ModelState| conditional_survivor(s, &first, true_median)), truth[flat.len() + 1]),
        (Box::new(|s: &ModelState| quantile_ratio(s, &first, &second, 0.5)), truth[flat.len() + 2]),
    ];
    for (w, target) in &functionals {
        let band = functional_band(&state, &draws, w, NOMINAL_LEVEL)?;
        let values: Vec<f64> = draws.iter().filter_map(|s| w(s).ok().filter(|v| v.is_finite())).collect();
        out.push(Estimate {
            value: band.estimate,
            see: sample_sd(&values),
            covered: band.lo <= *target && *target <= band.hi,
        });
    }
    Ok(out)
}

/// Generates, fits and analyzes replicate `index`.
pub fn run_replicate(scenario: &Scenario, censoring: Option<f64>, index: usize) -> Result<ReplicateOutcome> {
    scenario.validate()?;
    let mut rng = scenario.replicate_rng(index as u64);
    let data = generate_with(scenario, censoring, &mut rng)?;
    let seed = rng.random();
    let censored = data.len() - data.n_events();
    Ok(ReplicateOutcome {
        index,
        censored_fraction: censored as f64 / data.len() as f64,
        estimates: estimate_replicate(scenario, &data, seed).map_err(|e| e.to_string()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantitySummary {
    pub quantity: String,
    pub truth: f64,
    /// Median of `estimate - truth`.
    pub median_bias: f64,
    /// Standard deviation of the estimates; absent with one replicate.
    pub se: Option<f64>,
    /// Median estimated standard error.
    pub see: f64,
    pub coverage_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub scenario: Scenario,
    pub censoring_location: Option<f64>,
    pub mean_censored_fraction: f64,
    pub completed: usize,
    pub failed: usize,
    pub quantities: Vec<QuantitySummary>,
}

impl StudySummary {
    pub fn quantity(&self, name: &str) -> Option<&QuantitySummary> {
        self.quantities.iter().find(|q| q.quantity == name)
    }

    /// Table with one row per quantity; floats carry 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("quantity,truth,bias,se,see,coverage\n");
        for q in &self.quantities {
            let se = q.se.map(|v| format!("{v:.16e}")).unwrap_or_default();
            writeln!(
                out,
                "{},{:.16e},{:.16e},{},{:.16e},{:.16e}",
                q.quantity, q.truth, q.median_bias, se, q.see, q.coverage_pct
            )
            .expect("writing to a String");
        }
        out
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    crate::functionals::sample_quantile(values, 0.5)
}

/// Aggregates replicate outcomes, folded in replicate order.
pub fn summarize(
    scenario: &Scenario,
    censoring: Option<f64>,
    outcomes: &[ReplicateOutcome],
) -> Result<StudySummary> {
    let names = quantity_names(scenario.theta_true.q());
    let truth = truths(scenario);
    let successes: Vec<&Vec<Estimate>> = outcomes.iter().filter_map(|o| o.estimates.as_ref().ok()).collect();
    let failed = outcomes.len() - successes.len();
    if failed as f64 > MAX_FAILURE_FRACTION * outcomes.len() as f64 || successes.is_empty() {
        return Err(Error::StudyUnstable { failed, total: outcomes.len() });
    }
    let quantities = names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let values: Vec<f64> = successes.iter().map(|e| e[k].value).collect();
            let mut errors: Vec<f64> = values.iter().map(|v| v - truth[k]).collect();
            let mut sees: Vec<f64> = successes.iter().map(|e| e[k].see).collect();
            let covered = successes.iter().filter(|e| e[k].covered).count();
            QuantitySummary {
                quantity: (*name).to_string(),
                truth: truth[k],
                median_bias: median(&mut errors),
                se: (values.len() > 1).then(|| sample_sd(&values)),
                see: median(&mut sees),
                coverage_pct: 100.0 * covered as f64 / successes.len() as f64,
            }
        })
        .collect();
    Ok(StudySummary {
        scenario: scenario.clone(),
        censoring_location: censoring,
        mean_censored_fraction: outcomes.iter().map(|o| o.censored_fraction).sum::<f64>()
            / outcomes.len() as f64,
        completed: successes.len(),
        failed,
        quantities,
    })
}

/// Runs every replicate (in parallel) and summarizes them.
pub fn run_study(scenario: &Scenario) -> Result<StudySummary> {
    let censoring = calibrate_censoring(scenario)?;
    let outcomes = (0..scenario.replicates)
        .into_par_iter()
        .map(|index| run_replicate(scenario, censoring, index))
        .collect::<Result<Vec<_>>>()?;
    summarize(scenario, censoring, &outcomes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn scenario(censor_target: f64) -> Scenario {
        Scenario::reference(100, censor_target, Tau::Infinite, WeightSpec::LogRank, 17)
    }

    #[test]
    fn reference_truths() {
        let t = truths(&scenario(0.2));
        let expected = [1.0, 1.0, 1.0, 0.6931, 0.5, 0.3679];
        for (a, b) in t.iter().zip(expected) {
            assert!((a - b).abs() < 5e-5, "{a} vs {b}");
        }
        assert_eq!(quantity_names(1), vec!["beta1", "beta2", "gamma1", "A(0)", "S", "r"]);
    }

    #[test]
    fn no_censoring_means_all_events() {
        let s = scenario(0.0);
        assert_eq!(calibrate_censoring(&s).unwrap(), None);
        let data = generate_dataset(&s, None, 3).unwrap();
        assert_eq!(data.n_events(), data.len());
    }

    #[test]
    fn replicates_are_reproducible_and_distinct() {
        let s = scenario(0.2);
        let a = generate_dataset(&s, Some(0.5), 4).unwrap();
        let b = generate_dataset(&s, Some(0.5), 4).unwrap();
        let c = generate_dataset(&s, Some(0.5), 5).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn null_model_times_are_standard_normal() {
        let mut s = scenario(0.0);
        s.theta_true = Theta::zeros(2, 1);
        s.n = 100_000;
        let data = generate_dataset(&s, None, 0).unwrap();
        let mut times: Vec<f64> = data.observations().iter().map(|o| o.log_time).collect();
        times.sort_by(f64::total_cmp);
        let normal = Normal::standard();
        let n = times.len() as f64;
        let ks = times
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let f = normal.cdf(t);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.01, "KS distance {ks}");
    }

    #[test]
    fn calibrated_censoring_hits_target() {
        for target in [0.2, 0.5] {
            let s = scenario(target);
            let location = calibrate_censoring(&s).unwrap();
            let (mut censored, mut total) = (0, 0);
            for index in 0..5000 {
                let data = generate_dataset(&s, location, index).unwrap();
                censored += data.len() - data.n_events();
                total += data.len();
            }
            let fraction = censored as f64 / total as f64;
            assert!((fraction - target).abs() < 0.015, "target {target}: {fraction}");
        }
    }

    #[test]
    fn rejects_invalid_scenarios() {
        let mut s = scenario(0.2);
        s.censor_target = 1.0;
        assert!(s.validate().is_err());
        let mut s = scenario(0.2);
        s.theta_true = Theta::zeros(1, 1);
        assert!(s.validate().is_err());
        let mut s = scenario(0.2);
        s.replicates = 0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn single_replicate_has_no_se() {
        let mut s = scenario(0.2);
        s.replicates = 1;
        s.m = 100;
        let summary = run_study(&s).unwrap();
        assert_eq!(summary.completed + summary.failed, 1);
        for q in &summary.quantities {
            assert_eq!(q.se, None);
            assert!(q.coverage_pct == 0.0 || q.coverage_pct == 100.0);
        }
        let csv = summary.to_csv();
        assert!(csv.lines().nth(1).unwrap().contains(",,"));
    }

    #[test]
    fn too_many_failures_is_unstable() {
        let s = scenario(0.2);
        let ok = ReplicateOutcome {
            index: 0,
            censored_fraction: 0.2,
            estimates: Ok(vec![Estimate { value: 1.0, see: 0.1, covered: true }; 6]),
        };
        let bad = ReplicateOutcome { estimates: Err("no".into()), ..ok.clone() };
        let mut outcomes = vec![ok.clone(); 19];
        outcomes.push(bad.clone());
        assert!(summarize(&s, None, &outcomes).is_ok());
        outcomes.push(bad);
        assert!(matches!(summarize(&s, None, &outcomes), Err(Error::StudyUnstable { failed: 2, total: 21 })));
    }

    #[test]
    fn study_is_deterministic() {
        let mut s = scenario(0.2);
        s.replicates = 6;
        s.m = 60;
        let a = run_study(&s).unwrap();
        let b = run_study(&s).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a, b);
    }
}
