//! Importance-weighted estimates of the aggregate outcome and the IPS / LS
//! baseline objectives.
//!
//! With `w_i = π_θ(a_i|x_i) / π_0(a_i|x_i)` and `s_i = w_i r_i`, the aggregate
//! outcome is `μ = Σ s_i` (a sum, not an average). Its variance is estimated
//! either as a compound-Poisson sum (`Σ s_i²`) or as the variance of a sum of a
//! fixed number of i.i.d. terms (`n/(n−1) Σ (s_i − s̄)²`).
//!
//! Every gradient uses `∇ w_i = w_i ∇ ln π_θ(a_i|x_i)`, and the score of a softmax
//! row is `e_a − π`, so `Σ c_i g_i` collapses to a sparse scatter plus one dense
//! correction per context.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::policy::SoftmaxPolicy;

/// Propensities below this are rejected when loading data.
pub const MIN_PROPENSITY: f64 = 1e-12;

/// How the number of logged samples is modelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleCountMode {
    FixedN,
    #[default]
    PoissonN,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoggedRecord {
    pub context: usize,
    pub action: usize,
    pub reward: f64,
    pub propensity: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LoggedDataset {
    pub records: Vec<LoggedRecord>,
    pub mode: SampleCountMode,
}

impl LoggedDataset {
    pub fn new(records: Vec<LoggedRecord>, mode: SampleCountMode) -> Self {
        Self { records, mode }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Logged aggregate `Σ r_i`, i.e. `H_n(π_0)`.
    pub fn total_reward(&self) -> f64 {
        self.records.iter().map(|r| r.reward).sum()
    }

    pub fn mean_reward(&self) -> Result<f64> {
        self.require_nonempty()?;
        Ok(self.total_reward() / self.len() as f64)
    }

    fn require_nonempty(&self) -> Result<()> {
        if self.is_empty() {
            return domain("dataset has no records");
        }
        Ok(())
    }

    /// Checks record ranges against a policy's shape.
    pub fn validate_for(&self, policy: &SoftmaxPolicy) -> Result<()> {
        for (index, r) in self.records.iter().enumerate() {
            let bad = |reason: String| Err(Error::InvalidRecord { index, reason });
            if !(r.propensity > 0.0 && r.propensity <= 1.0) {
                return bad(format!("propensity {} outside (0, 1]", r.propensity));
            }
            if !(r.reward >= 0.0 && r.reward.is_finite()) {
                return bad(format!("reward {} is not a nonnegative number", r.reward));
            }
            if r.context >= policy.num_contexts() {
                return bad(format!(
                    "context {} out of range (num_contexts = {})",
                    r.context,
                    policy.num_contexts()
                ));
            }
            if r.action >= policy.num_actions() {
                return bad(format!(
                    "action {} out of range (num_actions = {})",
                    r.action,
                    policy.num_actions()
                ));
            }
        }
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?, None)
    }

    /// Parses `context,action,reward,propensity` rows, failing on the first bad line.
    pub fn from_csv_reader<R: Read>(reader: R, num_actions: Option<usize>) -> Result<Self> {
        let report = lint_csv(reader, num_actions)?;
        if let Some(issue) = report.issues.into_iter().next() {
            return Err(Error::InvalidLine {
                line: issue.line,
                reason: issue.reason,
            });
        }
        Ok(Self::new(report.records, SampleCountMode::default()))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(CSV_HEADER)?;
        for r in &self.records {
            w.write_record(&[
                r.context.to_string(),
                r.action.to_string(),
                r.reward.to_string(),
                r.propensity.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub const CSV_HEADER: [&str; 4] = ["context", "action", "reward", "propensity"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LintIssue {
    /// 1-based file line; the header is line 1.
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct LintReport {
    pub records: Vec<LoggedRecord>,
    pub issues: Vec<LintIssue>,
}

/// Reads a dataset CSV and collects every malformed row instead of stopping at
/// the first. A wrong header is a hard error.
pub fn lint_csv<R: Read>(reader: R, num_actions: Option<usize>) -> Result<LintReport> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(Error::InvalidLine {
            line: 1,
            reason: format!("expected header `{}`", CSV_HEADER.join(",")),
        });
    }
    let mut report = LintReport::default();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        match parse_row(&row, num_actions) {
            Ok(rec) => report.records.push(rec),
            Err(reason) => report.issues.push(LintIssue { line, reason }),
        }
    }
    Ok(report)
}

fn parse_row(
    row: &csv::StringRecord,
    num_actions: Option<usize>,
) -> std::result::Result<LoggedRecord, String> {
    if row.len() != 4 {
        return Err(format!("expected 4 fields, found {}", row.len()));
    }
    let context: usize = row[0]
        .parse()
        .map_err(|_| format!("bad context `{}`", &row[0]))?;
    let action: usize = row[1]
        .parse()
        .map_err(|_| format!("bad action index `{}`", &row[1]))?;
    if let Some(k) = num_actions {
        if action >= k {
            return Err(format!("bad action index {action} (num_actions = {k})"));
        }
    }
    let reward: f64 = row[2]
        .parse()
        .map_err(|_| format!("bad reward `{}`", &row[2]))?;
    if !(reward.is_finite() && reward >= 0.0) {
        return Err(format!("negative or non-finite reward {reward}"));
    }
    let propensity: f64 = row[3]
        .parse()
        .map_err(|_| format!("bad propensity `{}`", &row[3]))?;
    if !(propensity >= MIN_PROPENSITY && propensity <= 1.0) {
        return Err(format!(
            "propensity {propensity} outside [{MIN_PROPENSITY:e}, 1]"
        ));
    }
    Ok(LoggedRecord {
        context,
        action,
        reward,
        propensity,
    })
}

/// `μ`, `σ²` and their gradients, shaped like the policy's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateStats {
    pub mu: f64,
    pub sigma_sq: f64,
    pub grad_mu: Vec<f64>,
    pub grad_sigma_sq: Vec<f64>,
}

pub fn importance_weights(dataset: &LoggedDataset, policy: &SoftmaxPolicy) -> Result<Vec<f64>> {
    dataset.validate_for(policy)?;
    let probs = policy.probability_matrix();
    let k = policy.num_actions();
    Ok(dataset
        .records
        .iter()
        .map(|r| probs[r.context * k + r.action] / r.propensity)
        .collect())
}

/// Importance weights truncated at `max_weight`. Diagnostics only.
pub fn clipped_importance_weights(
    dataset: &LoggedDataset,
    policy: &SoftmaxPolicy,
    max_weight: f64,
) -> Result<Vec<f64>> {
    if !(max_weight > 0.0) {
        return domain(format!("clip level must be positive, got {max_weight}"));
    }
    let mut w = importance_weights(dataset, policy)?;
    for v in &mut w {
        *v = v.min(max_weight);
    }
    Ok(w)
}

fn weighted_rewards(dataset: &LoggedDataset, policy: &SoftmaxPolicy) -> Result<Vec<f64>> {
    dataset.require_nonempty()?;
    let w = importance_weights(dataset, policy)?;
    Ok(w.iter()
        .zip(&dataset.records)
        .map(|(w, r)| w * r.reward)
        .collect())
}

/// `μ_θ = Σ w_i r_i`.
pub fn aggregate_mean(dataset: &LoggedDataset, policy: &SoftmaxPolicy) -> Result<f64> {
    Ok(weighted_rewards(dataset, policy)?.iter().sum())
}

pub fn aggregate_variance(dataset: &LoggedDataset, policy: &SoftmaxPolicy) -> Result<f64> {
    aggregate_variance_with_mode(dataset, policy, dataset.mode)
}

pub fn aggregate_variance_with_mode(
    dataset: &LoggedDataset,
    policy: &SoftmaxPolicy,
    mode: SampleCountMode,
) -> Result<f64> {
    check_mode(dataset, mode)?;
    let s = weighted_rewards(dataset, policy)?;
    Ok(variance_of_sum(&s, mode))
}

fn check_mode(dataset: &LoggedDataset, mode: SampleCountMode) -> Result<()> {
    dataset.require_nonempty()?;
    if mode == SampleCountMode::FixedN && dataset.len() < 2 {
        return domain("fixed-n variance needs at least 2 records");
    }
    Ok(())
}

fn variance_of_sum(s: &[f64], mode: SampleCountMode) -> f64 {
    match mode {
        SampleCountMode::PoissonN => s.iter().map(|v| v * v).sum(),
        SampleCountMode::FixedN => {
            let n = s.len() as f64;
            let mean = s.iter().sum::<f64>() / n;
            let ss: f64 = s.iter().map(|v| (v - mean) * (v - mean)).sum();
            n / (n - 1.0) * ss
        }
    }
}

pub fn aggregate_stats(dataset: &LoggedDataset, policy: &SoftmaxPolicy) -> Result<AggregateStats> {
    aggregate_stats_with_mode(dataset, policy, dataset.mode)
}

pub fn aggregate_stats_with_mode(
    dataset: &LoggedDataset,
    policy: &SoftmaxPolicy,
    mode: SampleCountMode,
) -> Result<AggregateStats> {
    check_mode(dataset, mode)?;
    let probs = policy.probability_matrix();
    let s = weighted_rewards(dataset, policy)?;
    let mu: f64 = s.iter().sum();
    let sigma_sq = variance_of_sum(&s, mode);
    let grad_mu = score_combination(dataset, policy, &probs, &s);

    let coeffs: Vec<f64> = match mode {
        SampleCountMode::PoissonN => s.iter().map(|v| 2.0 * v * v).collect(),
        SampleCountMode::FixedN => {
            // Σ_i (s_i − s̄) = 0 removes the (1/n) Σ_j s_j g_j term.
            let n = s.len() as f64;
            let mean = mu / n;
            let scale = 2.0 * n / (n - 1.0);
            s.iter().map(|v| scale * (v - mean) * v).collect()
        }
    };
    let grad_sigma_sq = score_combination(dataset, policy, &probs, &coeffs);

    Ok(AggregateStats {
        mu,
        sigma_sq,
        grad_mu,
        grad_sigma_sq,
    })
}

/// `Σ_i c_i (e_{a_i} − π(·|x_i))` placed into the row of context `x_i`.
fn score_combination(
    dataset: &LoggedDataset,
    policy: &SoftmaxPolicy,
    probs: &[f64],
    coeffs: &[f64],
) -> Vec<f64> {
    let k = policy.num_actions();
    let mut out = vec![0.0; probs.len()];
    let mut per_context = vec![0.0; policy.num_contexts()];
    for (r, &c) in dataset.records.iter().zip(coeffs) {
        out[r.context * k + r.action] += c;
        per_context[r.context] += c;
    }
    for (x, total) in per_context.into_iter().enumerate() {
        if total != 0.0 {
            for (o, p) in out[x * k..(x + 1) * k]
                .iter_mut()
                .zip(&probs[x * k..(x + 1) * k])
            {
                *o -= total * p;
            }
        }
    }
    out
}

/// Mean importance-weighted reward `(1/n) Σ w_i r_i`.
pub fn ips_value(dataset: &LoggedDataset, policy: &SoftmaxPolicy) -> Result<f64> {
    Ok(aggregate_mean(dataset, policy)? / dataset.len() as f64)
}

pub fn ips_value_and_gradient(
    dataset: &LoggedDataset,
    policy: &SoftmaxPolicy,
) -> Result<(f64, Vec<f64>)> {
    let probs = policy.probability_matrix();
    let s = weighted_rewards(dataset, policy)?;
    let n = s.len() as f64;
    let value = s.iter().sum::<f64>() / n;
    let coeffs: Vec<f64> = s.iter().map(|v| v / n).collect();
    Ok((value, score_combination(dataset, policy, &probs, &coeffs)))
}

/// Logarithmic smoothing `(1/n) Σ ln(1 + λ s_i) / λ`; equals [`ips_value`] at `λ = 0`.
pub fn ls_value(dataset: &LoggedDataset, policy: &SoftmaxPolicy, lambda: f64) -> Result<f64> {
    Ok(ls_value_and_gradient(dataset, policy, lambda)?.0)
}

pub fn ls_value_and_gradient(
    dataset: &LoggedDataset,
    policy: &SoftmaxPolicy,
    lambda: f64,
) -> Result<(f64, Vec<f64>)> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return domain(format!("lambda must be a nonnegative number, got {lambda}"));
    }
    if lambda == 0.0 {
        return ips_value_and_gradient(dataset, policy);
    }
    let probs = policy.probability_matrix();
    let s = weighted_rewards(dataset, policy)?;
    let n = s.len() as f64;
    let value = s.iter().map(|v| (lambda * v).ln_1p() / lambda).sum::<f64>() / n;
    // d/dθ ln(1+λs)/λ = s/(1+λs) · g
    let coeffs: Vec<f64> = s.iter().map(|v| v / (1.0 + lambda * v) / n).collect();
    Ok((value, score_combination(dataset, policy, &probs, &coeffs)))
}

/// `λ = √(ln(1/δ) / n)`.
pub fn default_ls_lambda(n: usize, delta: f64) -> f64 {
    ((1.0 / delta).ln() / n as f64).sqrt()
}
