use std::cmp::Ordering;

use super::{EstimatorConfig, RiskSummary, StepHazard, Tau};
use crate::error::{Error, Result};
use crate::model::{inverse_scale, SurvivalDataset, Theta};

/// Residuals at one parameter value, sorted and grouped into distinct
/// levels with at-risk counts and at-risk feature means.
///
/// The feature of subject `i` is `(exp(gamma'z_i) x_i, z_i)`. Subjects are
/// visited in a canonical order that depends only on the multiset of
/// observations, so every sum here is independent of input order.
#[derive(Debug, Clone)]
pub(crate) struct RiskTable {
    n: usize,
    p: usize,
    dim: usize,
    residuals: Vec<f64>,
    features: Vec<f64>,
    events: Vec<bool>,
    order: Vec<usize>,
    level_of: Vec<usize>,
    levels: Vec<f64>,
    at_risk: Vec<usize>,
    level_events: Vec<usize>,
    means: Vec<f64>,
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
}

impl RiskTable {
    pub fn build(data: &SurvivalDataset, theta: &Theta) -> Result<Self> {
        data.check_theta(theta)?;
        let n = data.len();
        if n == 0 {
            return Err(Error::InvalidInput("dataset is empty".into()));
        }
        let (p, dim) = (data.p(), data.dim());
        let mut residuals = Vec::with_capacity(n);
        let mut features = Vec::with_capacity(n * dim);
        let mut events = Vec::with_capacity(n);
        for obs in data.observations() {
            let inv = inverse_scale(&obs.z, &theta.gamma)?;
            let shift: f64 = theta.beta.iter().zip(&obs.x).map(|(b, x)| b * x).sum();
            let eps = inv * (obs.log_time + shift);
            if !eps.is_finite() {
                return Err(Error::NumericOverflow("residual is not finite".into()));
            }
            residuals.push(eps);
            features.extend(obs.x.iter().map(|x| inv * x));
            features.extend_from_slice(&obs.z);
            events.push(obs.event);
        }

        let obs = data.observations();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            residuals[a]
                .total_cmp(&residuals[b])
                .then(events[a].cmp(&events[b]))
                .then(obs[a].log_time.total_cmp(&obs[b].log_time))
                .then_with(|| lexicographic(&obs[a].x, &obs[b].x))
                .then_with(|| lexicographic(&obs[a].z, &obs[b].z))
        });

        let mut levels = Vec::new();
        let mut starts = Vec::new();
        let mut level_of = vec![0; n];
        for (pos, &i) in order.iter().enumerate() {
            if levels.last() != Some(&residuals[i]) {
                levels.push(residuals[i]);
                starts.push(pos);
            }
            level_of[i] = levels.len() - 1;
        }
        starts.push(n);

        let n_levels = levels.len();
        let mut at_risk = vec![0; n_levels];
        let mut level_events = vec![0; n_levels];
        let mut means = vec![0.0; n_levels * dim];
        let mut running = vec![0.0; dim];
        let mut count = 0usize;
        for l in (0..n_levels).rev() {
            for &i in order[starts[l]..starts[l + 1]].iter().rev() {
                for (acc, f) in running.iter_mut().zip(&features[i * dim..(i + 1) * dim]) {
                    *acc += f;
                }
                count += 1;
                level_events[l] += usize::from(events[i]);
            }
            at_risk[l] = count;
            for (m, acc) in means[l * dim..(l + 1) * dim].iter_mut().zip(&running) {
                *m = acc / count as f64;
            }
        }

        Ok(Self {
            n,
            p,
            dim,
            residuals,
            features,
            events,
            order,
            level_of,
            levels,
            at_risk,
            level_events,
            means,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn residual(&self, i: usize) -> f64 {
        self.residuals[i]
    }

    pub fn event(&self, i: usize) -> bool {
        self.events[i]
    }

    pub fn feature(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn level_of(&self, i: usize) -> usize {
        self.level_of[i]
    }

    pub fn level_value(&self, l: usize) -> f64 {
        self.levels[l]
    }

    pub fn level_at_risk(&self, l: usize) -> usize {
        self.at_risk[l]
    }

    pub fn level_events(&self, l: usize) -> usize {
        self.level_events[l]
    }

    pub fn level_mean(&self, l: usize) -> &[f64] {
        &self.means[l * self.dim..(l + 1) * self.dim]
    }

    /// Fraction of the sample at risk at level `l`.
    pub fn level_fraction(&self, l: usize) -> f64 {
        self.at_risk[l] as f64 / self.n as f64
    }

    /// First level with value `>= t`, i.e. the risk set at `t`.
    pub fn level_at(&self, t: f64) -> Result<usize> {
        let l = self.levels.partition_point(|&v| v < t);
        if l == self.levels.len() {
            Err(Error::EmptyRiskSet { t })
        } else {
            Ok(l)
        }
    }

    pub fn summary(&self, t: f64) -> Result<RiskSummary> {
        let l = self.level_at(t)?;
        let mean = self.level_mean(l);
        Ok(RiskSummary {
            t,
            d0: self.level_fraction(l),
            eta_beta: mean[..self.p].to_vec(),
            eta_gamma: mean[self.p..].to_vec(),
        })
    }

    /// Levels that carry a jump of the hazard estimator: at least one event
    /// and value `<= tau`.
    pub fn jump_levels(&self, tau: Tau) -> impl Iterator<Item = usize> + '_ {
        (0..self.levels.len())
            .take_while(move |&l| tau.admits(self.levels[l]))
            .filter(move |&l| self.level_events[l] > 0)
    }

    pub fn hazard(&self, tau: Tau) -> StepHazard {
        let (times, increments) = self
            .jump_levels(tau)
            .map(|l| (self.levels[l], self.level_events[l] as f64 / self.at_risk[l] as f64))
            .unzip();
        StepHazard { times, increments }
    }

    /// Diagonal of the weight matrix at level `l`: `rho_beta` repeated `p`
    /// times followed by `rho_gamma` repeated `q` times.
    pub fn weight_diagonal(&self, cfg: &EstimatorConfig, l: usize) -> Vec<f64> {
        let (rb, rg) = cfg.weight.eval(self.levels[l], self.level_fraction(l));
        (0..self.dim).map(|k| if k < self.p { rb } else { rg }).collect()
    }

    /// Per-subject score contribution; zero unless the subject is an event
    /// at or below `tau`.
    pub fn psi(&self, cfg: &EstimatorConfig, i: usize) -> Vec<f64> {
        let eps = self.residuals[i];
        if !self.events[i] || !cfg.tau.admits(eps) {
            return vec![0.0; self.dim];
        }
        let l = self.level_of[i];
        let rho = self.weight_diagonal(cfg, l);
        self.feature(i).iter().zip(self.level_mean(l)).zip(&rho).map(|((f, m), r)| r * (f - m)).collect()
    }

    pub fn score(&self, cfg: &EstimatorConfig) -> Vec<f64> {
        let mut total = vec![0.0; self.dim];
        for &i in &self.order {
            if !self.events[i] || !cfg.tau.admits(self.residuals[i]) {
                continue;
            }
            for (acc, v) in total.iter_mut().zip(self.psi(cfg, i)) {
                *acc += v;
            }
        }
        let n = self.n as f64;
        total.iter_mut().for_each(|v| *v /= n);
        total
    }
}
