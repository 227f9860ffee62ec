//! Score-function gradient ascent on the Gaussian-smoothed criterion, plus
//! plain gradient ascent on the IPS and logarithmic-smoothing baselines.
//!
//! With `h ~ N(μ_θ, σ²_θ)` the smoothed objective is `Ĵ(θ) = E[j(h)]`, and its
//! gradient is estimated from `m` Gaussian draws as
//!
//! ```text
//! 1/(m σ²) Σ_ℓ [ (h_ℓ − μ) ∇μ + ½(((h_ℓ − μ)/σ)² − 1) ∇σ² ] (j(h_ℓ) − b)
//! ```
//!
//! where `b` is zero, or the sample mean of `j(h_ℓ)` when the control variate
//! is enabled.

use std::io::Write;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::criteria::Criterion;
use crate::error::{domain, Error, Result};
use crate::estimators::{
    aggregate_stats_with_mode, ips_value_and_gradient, ls_value_and_gradient, AggregateStats,
    LoggedDataset, SampleCountMode,
};
use crate::policy::SoftmaxPolicy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub gaussian_samples: usize,
    pub iterations: usize,
    pub seed: u64,
    pub variance_mode: SampleCountMode,
    /// Added to `σ²` inside the gradient only.
    pub variance_floor: f64,
    pub control_variate: bool,
    /// When set, the step at iteration `k` is `η / (1 + k/τ)`.
    pub step_decay: Option<f64>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1.0,
            gaussian_samples: 1000,
            iterations: 2000,
            seed: 0,
            variance_mode: SampleCountMode::PoissonN,
            variance_floor: 1e-12,
            control_variate: false,
            step_decay: None,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        // eta = 0 is accepted as a no-op run
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be a nonnegative number, got {}",
                self.learning_rate
            )));
        }
        if self.gaussian_samples == 0 {
            return Err(Error::Config("gaussian_samples must be at least 1".into()));
        }
        if !(self.variance_floor >= 0.0) {
            return Err(Error::Config(format!(
                "variance_floor must be nonnegative, got {}",
                self.variance_floor
            )));
        }
        if let Some(tau) = self.step_decay {
            if !(tau > 0.0) {
                return Err(Error::Config(format!("step_decay must be positive, got {tau}")));
            }
        }
        Ok(())
    }

    fn step_size(&self, k: usize) -> f64 {
        match self.step_decay {
            Some(tau) => self.learning_rate / (1.0 + k as f64 / tau),
            None => self.learning_rate,
        }
    }
}

/// One Monte-Carlo gradient of `Ĵ` together with the moments needed for its
/// standard error.
#[derive(Debug, Clone)]
pub struct GradientEstimate {
    pub gradient: Vec<f64>,
    /// Sample mean of `j(h_ℓ)`.
    pub j_hat: f64,
    pub mu: f64,
    /// `σ²` as used in the estimate, floor included.
    pub sigma_sq: f64,
    grad_mu: Vec<f64>,
    grad_sigma_sq: Vec<f64>,
    samples: usize,
    var_a: f64,
    var_b: f64,
    cov_ab: f64,
}

impl GradientEstimate {
    /// Componentwise Monte-Carlo standard error of `gradient`.
    pub fn standard_error(&self) -> Vec<f64> {
        self.grad_mu
            .iter()
            .zip(&self.grad_sigma_sq)
            .map(|(&gm, &gs)| (self.component_variance(gm, gs) / self.samples as f64).sqrt())
            .collect()
    }

    /// Trace of the covariance of a single-sample gradient term.
    pub fn per_sample_variance(&self) -> f64 {
        self.grad_mu
            .iter()
            .zip(&self.grad_sigma_sq)
            .map(|(&gm, &gs)| self.component_variance(gm, gs))
            .sum()
    }

    fn component_variance(&self, gm: f64, gs: f64) -> f64 {
        (gm * gm * self.var_a + gs * gs * self.var_b + 2.0 * gm * gs * self.cov_ab).max(0.0)
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.gradient)
    }
}

fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Score-function estimate of `∇Ĵ` at the point described by `stats`.
pub fn score_gradient<R: Rng + ?Sized>(
    stats: &AggregateStats,
    criterion: &Criterion,
    samples: usize,
    variance_floor: f64,
    control_variate: bool,
    rng: &mut R,
) -> Result<GradientEstimate> {
    if samples == 0 {
        return domain("gaussian sample count must be at least 1");
    }
    let sigma_sq = stats.sigma_sq + variance_floor;
    if !(sigma_sq > 0.0) || !sigma_sq.is_finite() {
        return Err(Error::DegenerateDistribution { sigma_sq });
    }
    let sigma = sigma_sq.sqrt();
    let mu = stats.mu;

    let draws: Vec<(f64, f64)> = (0..samples)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            (z, criterion.evaluate_clamped(mu + sigma * z))
        })
        .collect();
    let m = samples as f64;
    let j_hat = draws.iter().map(|d| d.1).sum::<f64>() / m;
    let baseline = if control_variate { j_hat } else { 0.0 };

    // per-sample scalars multiplying ∇μ and ∇σ²:
    //   a = (h − μ)(j − b)/σ² = z (j − b)/σ,  b = ½(z² − 1)(j − b)/σ²
    let coeff = |&(z, j): &(f64, f64)| {
        let centred = j - baseline;
        (z * centred / sigma, 0.5 * (z * z - 1.0) * centred / sigma_sq)
    };
    let (sum_a, sum_b) = draws
        .iter()
        .map(coeff)
        .fold((0.0, 0.0), |acc, (a, b)| (acc.0 + a, acc.1 + b));
    let (mean_a, mean_b) = (sum_a / m, sum_b / m);
    let (mut var_a, mut var_b, mut cov_ab) = (0.0, 0.0, 0.0);
    for d in &draws {
        let (a, b) = coeff(d);
        var_a += (a - mean_a) * (a - mean_a);
        var_b += (b - mean_b) * (b - mean_b);
        cov_ab += (a - mean_a) * (b - mean_b);
    }
    let dof = (m - 1.0).max(1.0);

    let gradient = stats
        .grad_mu
        .iter()
        .zip(&stats.grad_sigma_sq)
        .map(|(gm, gs)| mean_a * gm + mean_b * gs)
        .collect();

    Ok(GradientEstimate {
        gradient,
        j_hat,
        mu,
        sigma_sq,
        grad_mu: stats.grad_mu.clone(),
        grad_sigma_sq: stats.grad_sigma_sq.clone(),
        samples,
        var_a: var_a / dof,
        var_b: var_b / dof,
        cov_ab: cov_ab / dof,
    })
}

/// Estimates `μ_θ`, `σ²_θ` from the data and returns one score-function gradient.
pub fn gradient_estimate<R: Rng + ?Sized>(
    dataset: &LoggedDataset,
    policy: &SoftmaxPolicy,
    criterion: &Criterion,
    config: &OptimizerConfig,
    rng: &mut R,
) -> Result<GradientEstimate> {
    let stats = aggregate_stats_with_mode(dataset, policy, config.variance_mode)?;
    score_gradient(
        &stats,
        criterion,
        config.gaussian_samples,
        config.variance_floor,
        config.control_variate,
        rng,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub mu: f64,
    pub sigma_sq: f64,
    pub j_hat: f64,
    pub grad_norm: f64,
    pub entropy: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OptimizationTrace {
    pub records: Vec<TraceRecord>,
}

impl OptimizationTrace {
    pub const CSV_HEADER: [&'static str; 6] =
        ["iter", "mu", "sigma_sq", "j_hat", "grad_norm", "entropy"];

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(Self::CSV_HEADER)?;
        for r in &self.records {
            w.write_record(&[
                r.iter.to_string(),
                r.mu.to_string(),
                r.sigma_sq.to_string(),
                r.j_hat.to_string(),
                r.grad_norm.to_string(),
                r.entropy.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Baseline objectives optimized with their exact gradients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BaselineObjective {
    Ips,
    Ls { lambda: f64 },
}

/// Runs `config.iterations` steps of `θ ← θ + η ∇Ĵ(θ)`.
pub fn optimize(
    dataset: &LoggedDataset,
    initial_policy: &SoftmaxPolicy,
    criterion: &Criterion,
    config: &OptimizerConfig,
) -> Result<(SoftmaxPolicy, OptimizationTrace)> {
    config.validate()?;
    criterion.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    ascend(initial_policy, config, |policy| {
        let est = gradient_estimate(dataset, policy, criterion, config, &mut rng)?;
        Ok(Step {
            mu: est.mu,
            sigma_sq: est.sigma_sq,
            j_hat: est.j_hat,
            gradient: est.gradient,
        })
    })
}

pub fn optimize_baseline(
    dataset: &LoggedDataset,
    initial_policy: &SoftmaxPolicy,
    objective: BaselineObjective,
    config: &OptimizerConfig,
) -> Result<(SoftmaxPolicy, OptimizationTrace)> {
    config.validate()?;
    if let BaselineObjective::Ls { lambda } = objective {
        if !(lambda >= 0.0) {
            return domain(format!("lambda must be nonnegative, got {lambda}"));
        }
    }
    ascend(initial_policy, config, |policy| {
        let stats = aggregate_stats_with_mode(dataset, policy, config.variance_mode)?;
        let (value, gradient) = match objective {
            BaselineObjective::Ips => ips_value_and_gradient(dataset, policy)?,
            BaselineObjective::Ls { lambda } => ls_value_and_gradient(dataset, policy, lambda)?,
        };
        Ok(Step {
            mu: stats.mu,
            sigma_sq: stats.sigma_sq,
            j_hat: value,
            gradient,
        })
    })
}

struct Step {
    mu: f64,
    sigma_sq: f64,
    j_hat: f64,
    gradient: Vec<f64>,
}

fn ascend<F>(
    initial_policy: &SoftmaxPolicy,
    config: &OptimizerConfig,
    mut step: F,
) -> Result<(SoftmaxPolicy, OptimizationTrace)>
where
    F: FnMut(&SoftmaxPolicy) -> Result<Step>,
{
    let mut policy = initial_policy.clone();
    let mut trace = OptimizationTrace {
        records: Vec::with_capacity(config.iterations),
    };
    for k in 0..config.iterations {
        let s = step(&policy)?;
        if s.gradient.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite {
                what: "gradient",
                iteration: k,
            });
        }
        trace.records.push(TraceRecord {
            iter: k,
            mu: s.mu,
            sigma_sq: s.sigma_sq,
            j_hat: s.j_hat,
            grad_norm: l2_norm(&s.gradient),
            entropy: policy.mean_entropy(),
        });
        let eta = config.step_size(k);
        let theta: Vec<f64> = policy
            .theta()
            .iter()
            .zip(&s.gradient)
            .map(|(t, g)| t + eta * g)
            .collect();
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite {
                what: "parameter",
                iteration: k,
            });
        }
        policy = policy.with_theta(theta)?;
    }
    Ok((policy, trace))
}
