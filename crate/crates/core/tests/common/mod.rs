#![allow(dead_code)]

use aggropt_core::{LoggedDataset, LoggedRecord, SampleCountMode, SoftmaxPolicy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A random single-context instance: policy parameters and a dataset logged by
/// a different random softmax policy.
pub struct Instance {
    pub policy: SoftmaxPolicy,
    pub dataset: LoggedDataset,
}

pub fn random_instance(seed: u64, k: usize, n: usize, mode: SampleCountMode) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let logits: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
    let logging = SoftmaxPolicy::from_logits(logits).unwrap();
    let p0 = logging.action_probabilities(0).unwrap();
    let records = (0..n)
        .map(|_| {
            let action = logging.sample_action(0, &mut rng).unwrap();
            LoggedRecord {
                context: 0,
                action,
                reward: rng.random_range(0.0..1.0),
                propensity: p0[action],
            }
        })
        .collect();
    let theta: Vec<f64> = (0..k).map(|_| rng.random_range(-1.5..1.5)).collect();
    Instance {
        policy: SoftmaxPolicy::from_logits(theta).unwrap(),
        dataset: LoggedDataset::new(records, mode),
    }
}

/// Softmax written out directly, independent of the library.
pub fn naive_softmax(theta: &[f64]) -> Vec<f64> {
    let e: Vec<f64> = theta.iter().map(|t| t.exp()).collect();
    let z: f64 = e.iter().sum();
    e.iter().map(|v| v / z).collect()
}

/// `(μ, σ²)` from the textbook formulas.
pub fn naive_stats(theta: &[f64], ds: &LoggedDataset, mode: SampleCountMode) -> (f64, f64) {
    let pi = naive_softmax(theta);
    let s: Vec<f64> = ds
        .records
        .iter()
        .map(|r| pi[r.action] / r.propensity * r.reward)
        .collect();
    let mu: f64 = s.iter().sum();
    let n = s.len() as f64;
    let var = match mode {
        SampleCountMode::PoissonN => s.iter().map(|v| v * v).sum(),
        SampleCountMode::FixedN => {
            let mean = mu / n;
            n / (n - 1.0) * s.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
        }
    };
    (mu, var)
}

/// Central finite differences of `f` at `theta` with step `h`.
pub fn central_difference(theta: &[f64], h: f64, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    (0..theta.len())
        .map(|i| {
            let mut plus = theta.to_vec();
            let mut minus = theta.to_vec();
            plus[i] += h;
            minus[i] -= h;
            (f(&plus) - f(&minus)) / (2.0 * h)
        })
        .collect()
}

/// Largest componentwise relative error, ignoring components whose reference
/// magnitude is below `floor`.
pub fn max_relative_error(actual: &[f64], reference: &[f64], floor: f64) -> f64 {
    actual
        .iter()
        .zip(reference)
        .filter(|(_, r)| r.abs() > floor)
        .map(|(a, r)| ((a - r) / r).abs())
        .fold(0.0, f64::max)
}
