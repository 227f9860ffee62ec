//! Synthetic single-context Bernoulli bandit with a skewed logging policy.

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::estimators::{importance_weights, LoggedDataset, LoggedRecord, SampleCountMode};
use crate::policy::SoftmaxPolicy;

#[derive(Debug, Clone, PartialEq)]
pub struct BanditEnvironment {
    /// Decay rate of the logging logits `−β a / K`.
    pub beta: f64,
    pub reward_probs: Vec<f64>,
    pub logging_policy: SoftmaxPolicy,
}

/// On-disk form of an environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentDump {
    #[serde(rename = "K")]
    pub k: usize,
    pub beta: f64,
    pub reward_probs: Vec<f64>,
    pub logging_theta: Vec<f64>,
}

impl BanditEnvironment {
    pub fn new(reward_probs: Vec<f64>, logging_policy: SoftmaxPolicy, beta: f64) -> Result<Self> {
        if logging_policy.num_contexts() != 1 {
            return domain("bandit environments have a single context");
        }
        if logging_policy.num_actions() != reward_probs.len() {
            return domain(format!(
                "{} reward probabilities for {} actions",
                reward_probs.len(),
                logging_policy.num_actions()
            ));
        }
        if let Some(a) = reward_probs.iter().position(|p| !(0.0..=1.0).contains(p)) {
            return domain(format!("reward probability of action {a} outside [0, 1]"));
        }
        if logging_policy.action_probabilities(0)?.iter().any(|&p| p <= 0.0) {
            return domain("logging policy must give every action positive probability");
        }
        Ok(Self {
            beta,
            reward_probs,
            logging_policy,
        })
    }

    pub fn num_actions(&self) -> usize {
        self.reward_probs.len()
    }

    pub fn logging_probabilities(&self) -> Vec<f64> {
        self.logging_policy.probability_matrix()
    }

    pub fn dump(&self) -> EnvironmentDump {
        EnvironmentDump {
            k: self.num_actions(),
            beta: self.beta,
            reward_probs: self.reward_probs.clone(),
            logging_theta: self.logging_policy.theta().to_vec(),
        }
    }

    pub fn from_dump(d: EnvironmentDump) -> Result<Self> {
        if d.logging_theta.len() != d.k {
            return domain("logging_theta length differs from K");
        }
        Self::new(d.reward_probs, SoftmaxPolicy::from_logits(d.logging_theta)?, d.beta)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&self.dump())? + "\n")?;
        Ok(())
    }
}

/// Parameters of the calibrated environment family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvironmentSpec {
    pub num_actions: usize,
    pub beta: f64,
    /// Target value of the logging policy.
    pub logging_value: f64,
    /// Shape parameters of the per-action Beta draws before rescaling.
    pub reward_alpha: f64,
    pub reward_beta: f64,
    /// Reward draws are multiplied by `exp(-reward_decay·a/K)` before rescaling.
    pub reward_decay: f64,
}

impl Default for EnvironmentSpec {
    fn default() -> Self {
        Self {
            num_actions: 1000,
            beta: 10.0,
            logging_value: 0.05,
            reward_alpha: 2.0,
            reward_beta: 38.0,
            reward_decay: 0.0,
        }
    }
}

/// Tolerance on the calibrated logging value.
pub const LOGGING_VALUE_TOLERANCE: f64 = 0.002;

impl EnvironmentSpec {
    pub fn build(&self, seed: u64) -> Result<BanditEnvironment> {
        let k = self.num_actions;
        if k < 2 {
            return Err(Error::Config("num_actions must be at least 2".into()));
        }
        let logits: Vec<f64> = (0..k).map(|a| -self.beta * a as f64 / k as f64).collect();
        let logging = SoftmaxPolicy::from_logits(logits)?;
        let probs0 = logging.probability_matrix();

        let shape = rand_distr::Beta::new(self.reward_alpha, self.reward_beta)
            .map_err(|e| Error::Config(format!("reward shape: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<f64> = (0..k)
            .map(|a| shape.sample(&mut rng) * (-self.reward_decay * a as f64 / k as f64).exp())
            .collect();

        let rewards = calibrate(&raw, &probs0, self.logging_value)?;
        BanditEnvironment::new(rewards, logging, self.beta)
    }
}

/// Rescales `raw` so that its `weights`-average equals `target`, clipping at 1.
/// The scale is found by bisection because clipping makes the map nonlinear.
fn calibrate(raw: &[f64], weights: &[f64], target: f64) -> Result<Vec<f64>> {
    let value = |c: f64| -> f64 {
        raw.iter()
            .zip(weights)
            .map(|(r, w)| w * (c * r).min(1.0))
            .sum()
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    while value(hi) < target {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Config(format!(
                "cannot calibrate logging value to {target}"
            )));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if value(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let out: Vec<f64> = raw.iter().map(|r| (hi * r).min(1.0)).collect();
    let achieved: f64 = out.iter().zip(weights).map(|(p, w)| p * w).sum();
    if (achieved - target).abs() > LOGGING_VALUE_TOLERANCE {
        return Err(Error::Config(format!(
            "calibration reached {achieved}, target {target}"
        )));
    }
    Ok(out)
}

/// The 1000-action, skewed-logging environment used by the replication study.
pub fn default_environment(seed: u64) -> Result<BanditEnvironment> {
    EnvironmentSpec::default().build(seed)
}

/// Logs `n` interactions of the logging policy, with `n` fixed or Poisson.
/// A Poisson draw of zero yields an empty dataset.
pub fn generate_dataset<R: Rng + ?Sized>(
    env: &BanditEnvironment,
    expected_n: f64,
    mode: SampleCountMode,
    rng: &mut R,
) -> Result<LoggedDataset> {
    if !(expected_n > 0.0) || !expected_n.is_finite() {
        return domain(format!("expected sample count must be positive, got {expected_n}"));
    }
    let n = match mode {
        SampleCountMode::FixedN => expected_n.round() as usize,
        SampleCountMode::PoissonN => {
            let pois = Poisson::new(expected_n).map_err(|e| Error::Domain(e.to_string()))?;
            let draw: f64 = pois.sample(rng);
            draw as usize
        }
    };
    let probs = env.logging_probabilities();
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in &probs {
        acc += p;
        cdf.push(acc);
    }
    let last = probs.len() - 1;
    let records = (0..n)
        .map(|_| {
            let u: f64 = rng.random::<f64>() * acc;
            let action = cdf.partition_point(|&c| c <= u).min(last);
            let hit: f64 = rng.random();
            LoggedRecord {
                context: 0,
                action,
                reward: if hit < env.reward_probs[action] { 1.0 } else { 0.0 },
                propensity: probs[action],
            }
        })
        .collect();
    Ok(LoggedDataset::new(records, mode))
}

/// Exact expected reward `Σ_a π(a) p_a`.
pub fn true_value(env: &BanditEnvironment, policy: &SoftmaxPolicy) -> Result<f64> {
    if policy.num_contexts() != 1 || policy.num_actions() != env.num_actions() {
        return domain(format!(
            "policy shape {}x{} does not match environment with {} actions",
            policy.num_contexts(),
            policy.num_actions(),
            env.num_actions()
        ));
    }
    Ok(policy
        .action_probabilities(0)?
        .iter()
        .zip(&env.reward_probs)
        .map(|(p, r)| p * r)
        .sum())
}

/// Aggregate outcome `Σ w_i r_i` recomputed on `num_resamples` with-replacement
/// resamples of the dataset.
pub fn bootstrap_outcome_distribution<R: Rng + ?Sized>(
    dataset: &LoggedDataset,
    policy: &SoftmaxPolicy,
    num_resamples: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if dataset.is_empty() {
        return domain("cannot bootstrap an empty dataset");
    }
    if num_resamples == 0 {
        return domain("num_resamples must be at least 1");
    }
    let s: Vec<f64> = importance_weights(dataset, policy)?
        .iter()
        .zip(&dataset.records)
        .map(|(w, r)| w * r.reward)
        .collect();
    let n = s.len();
    Ok((0..num_resamples)
        .map(|_| (0..n).map(|_| s[rng.random_range(0..n)]).sum())
        .collect())
}

/// Fresh aggregate outcomes: `draws` sums of `n` rewards collected by `policy`.
pub fn simulate_outcomes<R: Rng + ?Sized>(
    env: &BanditEnvironment,
    policy: &SoftmaxPolicy,
    n: u64,
    draws: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    // in a single-context Bernoulli bandit each reward is Bernoulli(V(π))
    let v = true_value(env, policy)?.clamp(0.0, 1.0);
    let bin = Binomial::new(n, v).map_err(|e| Error::Domain(e.to_string()))?;
    Ok((0..draws).map(|_| bin.sample(rng) as f64).collect())
}
