//! The repeated A/B simulation: every replication draws a fresh logged
//! dataset, trains each method on it, and scores the learned policies by their
//! exact expected reward.

use std::fs;
use std::path::Path;

use aggropt_core::simulator::{generate_dataset, true_value, BanditEnvironment};
use aggropt_core::LoggedDataset;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, ImprovementBaseline};
use crate::error::{HarnessError, Result};
use crate::report::{render_table, RawRecord, ReplicationReport};
use crate::train::{dataset_hash, method_seed, train_method};

const MAX_REDRAWS: usize = 1000;

pub struct StudyOutput {
    pub environment: BanditEnvironment,
    pub logging_value: f64,
    pub report: ReplicationReport,
}

pub fn build_environment(config: &ExperimentConfig) -> Result<BanditEnvironment> {
    config
        .environment
        .build(config.environment_seed)
        .map_err(|e| HarnessError::Config(format!("environment: {e}")))
}

/// Draws the dataset for `seed`. Empty Poisson draws are redrawn from the
/// same stream; the number of redraws is returned alongside.
pub fn draw_dataset(
    config: &ExperimentConfig,
    env: &BanditEnvironment,
    seed: u64,
) -> Result<(LoggedDataset, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for redraws in 0..MAX_REDRAWS {
        let ds = generate_dataset(env, config.n, config.sample_count_mode, &mut rng)?;
        if !ds.is_empty() {
            return Ok((ds, redraws));
        }
    }
    Err(HarnessError::Config(format!(
        "{MAX_REDRAWS} consecutive empty datasets for seed {seed}"
    )))
}

pub fn run_replication_study(config: &ExperimentConfig) -> Result<StudyOutput> {
    config.validate()?;
    let env = build_environment(config)?;
    let logging_value = true_value(&env, &env.logging_policy)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| HarnessError::Config(format!("worker pool: {e}")))?;

    // indexed collect keeps replication order regardless of completion order
    let per_rep: Vec<Result<Vec<RawRecord>>> = pool.install(|| {
        (0..config.num_replications)
            .into_par_iter()
            .map(|r| run_one(config, &env, logging_value, r))
            .collect()
    });
    let mut raw = Vec::with_capacity(config.num_replications * config.methods.len());
    for rows in per_rep {
        raw.extend(rows?);
    }
    let names: Vec<String> = config.methods.iter().map(|m| m.name.clone()).collect();
    Ok(StudyOutput {
        environment: env,
        logging_value,
        report: ReplicationReport::from_raw(&names, &config.thresholds, raw),
    })
}

fn run_one(
    config: &ExperimentConfig,
    env: &BanditEnvironment,
    logging_value: f64,
    replication: usize,
) -> Result<Vec<RawRecord>> {
    let seed = config.base_seed.wrapping_add(replication as u64);
    let (dataset, redraws) = draw_dataset(config, env, seed)?;
    let hash = dataset_hash(&dataset)?;
    let logged_total = dataset.total_reward();
    if redraws > 0 {
        eprintln!("replication {replication}: redrew {redraws} empty dataset(s)");
    }
    eprintln!(
        "replication {replication} seed {seed} n {} logged {logged_total} dataset {hash}",
        dataset.len()
    );
    let baseline = match config.improvement_baseline {
        ImprovementBaseline::TrueValue => logging_value,
        ImprovementBaseline::Logged => logged_total / config.n,
    };
    let rows = config
        .methods
        .iter()
        .enumerate()
        .map(|(j, method)| {
            let seed_j = method_seed(method.optimizer.seed, seed, j);
            let outcome = train_method(method, env, &dataset, seed_j)
                .and_then(|(policy, _)| Ok((true_value(env, &policy)?, policy.mean_entropy())));
            let mut row = RawRecord {
                replication,
                seed,
                dataset_hash: hash.clone(),
                n: dataset.len(),
                logged_total,
                method: method.name.clone(),
                true_value: None,
                improvement: None,
                entropy: None,
                error: None,
            };
            match outcome {
                Ok((value, entropy)) => {
                    row.true_value = Some(value);
                    row.improvement = Some(value / baseline - 1.0);
                    row.entropy = Some(entropy);
                }
                Err(e) => {
                    eprintln!("replication {replication} method {:?} failed: {e}", method.name);
                    row.error = Some(e.to_string());
                }
            }
            row
        })
        .collect();
    Ok(rows)
}

/// Writes `report.csv`, `report.txt`, `raw_replications.csv` and
/// `environment.json` into `dir`.
pub fn write_study_outputs(output: &StudyOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let table = render_table(&output.report)?;
    fs::write(dir.join("report.csv"), &table.csv)?;
    let mut text = table.text;
    text.push_str(&format!(
        "\nlogging policy value: {:.4}\n",
        output.logging_value
    ));
    let failures = output.report.failures();
    if failures > 0 {
        text.push_str(&format!("failed method runs: {failures}\n"));
    }
    fs::write(dir.join("report.txt"), text)?;
    let mut raw = Vec::new();
    output.report.write_raw_csv(&mut raw)?;
    fs::write(dir.join("raw_replications.csv"), raw)?;
    output.environment.save(dir.join("environment.json"))?;
    Ok(())
}

impl std::fmt::Debug for StudyOutput {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StudyOutput")
            .field("logging_value", &self.logging_value)
            .field("report", &self.report)
            .finish_non_exhaustive()
    }
}
