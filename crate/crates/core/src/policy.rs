//! Softmax policies over discrete contexts and actions.
//!
//! Each context owns one row of logits; `π(a | x) ∝ exp(θ[x][a])`.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Row-major logit matrix of shape `num_contexts × num_actions`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolicyFile", into = "PolicyFile")]
pub struct SoftmaxPolicy {
    num_contexts: usize,
    num_actions: usize,
    theta: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PolicyFile {
    num_contexts: usize,
    num_actions: usize,
    theta: Vec<Vec<f64>>,
}

impl TryFrom<PolicyFile> for SoftmaxPolicy {
    type Error = Error;

    fn try_from(file: PolicyFile) -> Result<Self> {
        if file.theta.len() != file.num_contexts {
            return domain(format!(
                "theta has {} rows, expected num_contexts = {}",
                file.theta.len(),
                file.num_contexts
            ));
        }
        if let Some(row) = file.theta.iter().find(|r| r.len() != file.num_actions) {
            return domain(format!(
                "theta row has {} entries, expected num_actions = {}",
                row.len(),
                file.num_actions
            ));
        }
        SoftmaxPolicy::from_flat(
            file.num_contexts,
            file.num_actions,
            file.theta.into_iter().flatten().collect(),
        )
    }
}

impl From<SoftmaxPolicy> for PolicyFile {
    fn from(p: SoftmaxPolicy) -> Self {
        PolicyFile {
            num_contexts: p.num_contexts,
            num_actions: p.num_actions,
            theta: p.theta.chunks(p.num_actions).map(<[f64]>::to_vec).collect(),
        }
    }
}

impl SoftmaxPolicy {
    /// Uniform policy (all logits zero).
    pub fn uniform(num_contexts: usize, num_actions: usize) -> Result<Self> {
        Self::from_flat(num_contexts, num_actions, vec![0.0; num_contexts * num_actions])
    }

    /// Single-context policy from one row of logits.
    pub fn from_logits(logits: Vec<f64>) -> Result<Self> {
        let k = logits.len();
        Self::from_flat(1, k, logits)
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let num_actions = rows.first().map_or(0, Vec::len);
        SoftmaxPolicy::try_from(PolicyFile {
            num_contexts: rows.len(),
            num_actions,
            theta: rows,
        })
    }

    pub fn from_flat(num_contexts: usize, num_actions: usize, theta: Vec<f64>) -> Result<Self> {
        if num_contexts < 1 {
            return domain("num_contexts must be at least 1");
        }
        if num_actions < 2 {
            return domain(format!("num_actions must be at least 2, got {num_actions}"));
        }
        if theta.len() != num_contexts * num_actions {
            return domain(format!(
                "theta has {} entries, expected {}",
                theta.len(),
                num_contexts * num_actions
            ));
        }
        if let Some(i) = theta.iter().position(|t| !t.is_finite()) {
            return domain(format!("theta entry {i} is not finite"));
        }
        Ok(Self {
            num_contexts,
            num_actions,
            theta,
        })
    }

    /// Same shape, new parameters.
    pub fn with_theta(&self, theta: Vec<f64>) -> Result<Self> {
        Self::from_flat(self.num_contexts, self.num_actions, theta)
    }

    pub fn num_contexts(&self) -> usize {
        self.num_contexts
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// Flat row-major parameters.
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn row(&self, context: usize) -> Result<&[f64]> {
        self.check_context(context)?;
        let k = self.num_actions;
        Ok(&self.theta[context * k..(context + 1) * k])
    }

    fn check_context(&self, context: usize) -> Result<()> {
        if context >= self.num_contexts {
            return domain(format!(
                "context {context} out of range (num_contexts = {})",
                self.num_contexts
            ));
        }
        Ok(())
    }

    fn check_action(&self, action: usize) -> Result<()> {
        if action >= self.num_actions {
            return domain(format!(
                "action {action} out of range (num_actions = {})",
                self.num_actions
            ));
        }
        Ok(())
    }

    pub fn action_probabilities(&self, context: usize) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.num_actions];
        softmax_into(self.row(context)?, &mut out);
        Ok(out)
    }

    /// Probabilities for every context, row-major.
    pub fn probability_matrix(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.theta.len()];
        for (row, dst) in self
            .theta
            .chunks(self.num_actions)
            .zip(out.chunks_mut(self.num_actions))
        {
            softmax_into(row, dst);
        }
        out
    }

    pub fn probability(&self, context: usize, action: usize) -> Result<f64> {
        self.check_action(action)?;
        Ok(self.action_probabilities(context)?[action])
    }

    /// Inverse-CDF draw from `π(· | context)`.
    pub fn sample_action<R: Rng + ?Sized>(&self, context: usize, rng: &mut R) -> Result<usize> {
        let probs = self.action_probabilities(context)?;
        Ok(sample_index(&probs, rng))
    }

    /// Score function `∇_θ ln π(action | context)` restricted to the context's row:
    /// the indicator of `action` minus the probability vector.
    pub fn log_prob_gradient(&self, context: usize, action: usize) -> Result<Vec<f64>> {
        self.check_action(action)?;
        let mut g = self.action_probabilities(context)?;
        for v in g.iter_mut() {
            *v = -*v;
        }
        g[action] += 1.0;
        Ok(g)
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self, context: usize) -> Result<f64> {
        Ok(entropy_of(&self.action_probabilities(context)?))
    }

    /// Entropy averaged over contexts.
    pub fn mean_entropy(&self) -> f64 {
        let probs = self.probability_matrix();
        let total: f64 = probs.chunks(self.num_actions).map(entropy_of).sum();
        total / self.num_contexts as f64
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }
}

/// Max-subtracted softmax of `logits` written into `out`.
pub fn softmax_into(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = (l - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

pub(crate) fn entropy_of(probs: &[f64]) -> f64 {
    let h: f64 = probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum();
    h.max(0.0)
}

pub(crate) fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // u landed in the rounding gap above the final partial sum
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}
