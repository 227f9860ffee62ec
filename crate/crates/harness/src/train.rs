//! Training a single configured method on one dataset.

use aggropt_core::optimizer::{optimize, optimize_baseline};
use aggropt_core::simulator::BanditEnvironment;
use aggropt_core::{
    BaselineObjective, LoggedDataset, OptimizationTrace, OptimizerConfig, Result, SoftmaxPolicy,
};
use sha2::{Digest, Sha256};

use crate::config::{Init, MethodConfig, Objective};

pub fn initial_policy(init: Init, env: &BanditEnvironment) -> Result<SoftmaxPolicy> {
    match init {
        Init::Logging => Ok(env.logging_policy.clone()),
        Init::Uniform => SoftmaxPolicy::uniform(1, env.num_actions()),
    }
}

/// Optimizer seed for method `index` on a dataset drawn with `dataset_seed`.
pub fn method_seed(configured: u64, dataset_seed: u64, index: usize) -> u64 {
    configured
        .wrapping_add(dataset_seed.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add((index as u64).wrapping_mul(0xbf58_476d_1ce4_e5b9))
}

pub fn train_method(
    method: &MethodConfig,
    env: &BanditEnvironment,
    dataset: &LoggedDataset,
    seed: u64,
) -> Result<(SoftmaxPolicy, OptimizationTrace)> {
    let init = initial_policy(method.init, env)?;
    let config = OptimizerConfig {
        seed,
        ..method.optimizer.clone()
    };
    match method.objective {
        Objective::LoggingPolicy => Ok((
            env.logging_policy.clone(),
            OptimizationTrace { records: Vec::new() },
        )),
        Objective::Ips => optimize_baseline(dataset, &init, BaselineObjective::Ips, &config),
        Objective::Ls { .. } => {
            let lambda = method.objective.ls_lambda(dataset.len()).unwrap_or_default();
            optimize_baseline(dataset, &init, BaselineObjective::Ls { lambda }, &config)
        }
        Objective::Criterion { criterion } => {
            let criterion = criterion.resolve(dataset.total_reward());
            optimize(dataset, &init, &criterion, &config)
        }
    }
}

/// Hex SHA-256 of the dataset's CSV serialization.
pub fn dataset_hash(dataset: &LoggedDataset) -> Result<String> {
    let mut bytes = Vec::new();
    dataset.write_csv(&mut bytes)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// File-name-safe version of a method name, prefixed by its position.
pub fn file_stem(index: usize, name: &str) -> String {
    let slug: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect();
    format!("{index:02}_{slug}")
}
