//! In-sample behaviour on a single logged dataset: bootstrap outcome
//! histograms, final entropies and optimization traces per method.

use std::fs;
use std::path::Path;

use aggropt_core::estimators::aggregate_mean;
use aggropt_core::simulator::{bootstrap_outcome_distribution, true_value, BanditEnvironment};
use aggropt_core::OptimizationTrace;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::study::{build_environment, draw_dataset};
use crate::train::{dataset_hash, file_stem, method_seed, train_method};

#[derive(Debug, Clone)]
pub struct InsampleMethod {
    pub name: String,
    pub entropy: f64,
    /// `Σ w_i r_i` on the training dataset, the method's own claim.
    pub in_sample_outcome: f64,
    pub true_value: f64,
    pub outcomes: Vec<f64>,
    pub trace: OptimizationTrace,
}

impl InsampleMethod {
    pub fn bootstrap_mean(&self) -> f64 {
        self.outcomes.iter().sum::<f64>() / self.outcomes.len() as f64
    }

    /// Share of bootstrap outcomes strictly above `level`.
    pub fn mass_above(&self, level: f64) -> f64 {
        self.outcomes.iter().filter(|&&h| h > level).count() as f64 / self.outcomes.len() as f64
    }
}

#[derive(Debug)]
pub struct InsampleOutput {
    pub environment: BanditEnvironment,
    pub seed: u64,
    pub dataset_hash: String,
    pub logged_total: f64,
    /// One entry per configured method; failures carry the error text.
    pub methods: Vec<std::result::Result<InsampleMethod, String>>,
}

impl InsampleOutput {
    pub fn method(&self, name: &str) -> Option<&InsampleMethod> {
        self.methods.iter().flatten().find(|m| m.name == name)
    }

    pub fn failures(&self) -> usize {
        self.methods.iter().filter(|m| m.is_err()).count()
    }
}

/// Trains every method on the dataset drawn with `base_seed` and bootstraps
/// the resulting aggregate outcomes.
pub fn run_insample_analysis(config: &ExperimentConfig) -> Result<InsampleOutput> {
    config.validate()?;
    let env = build_environment(config)?;
    let seed = config.base_seed;
    let (dataset, redraws) = draw_dataset(config, &env, seed)?;
    if redraws > 0 {
        eprintln!("redrew {redraws} empty dataset(s)");
    }
    let hash = dataset_hash(&dataset)?;
    eprintln!("seed {seed} n {} logged {} dataset {hash}", dataset.len(), dataset.total_reward());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| HarnessError::Config(format!("worker pool: {e}")))?;

    let methods = pool.install(|| {
        config
            .methods
            .par_iter()
            .enumerate()
            .map(|(j, method)| {
                let run = || -> aggropt_core::Result<InsampleMethod> {
                    let (policy, trace) = train_method(
                        method,
                        &env,
                        &dataset,
                        method_seed(method.optimizer.seed, seed, j),
                    )?;
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(j as u64 + 1);
                    let outcomes = bootstrap_outcome_distribution(
                        &dataset,
                        &policy,
                        config.bootstrap_resamples,
                        &mut rng,
                    )?;
                    Ok(InsampleMethod {
                        name: method.name.clone(),
                        entropy: policy.mean_entropy(),
                        in_sample_outcome: aggregate_mean(&dataset, &policy)?,
                        true_value: true_value(&env, &policy)?,
                        outcomes,
                        trace,
                    })
                };
                run().map_err(|e| {
                    eprintln!("method {:?} failed: {e}", method.name);
                    e.to_string()
                })
            })
            .collect()
    });

    Ok(InsampleOutput {
        environment: env,
        seed,
        dataset_hash: hash,
        logged_total: dataset.total_reward(),
        methods,
    })
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    method: &'a str,
    entropy: Option<f64>,
    in_sample_outcome: Option<f64>,
    bootstrap_mean: Option<f64>,
    mass_above_logged: Option<f64>,
    true_value: Option<f64>,
    error: Option<&'a str>,
}

/// Writes `histograms/*.csv`, `traces/*.csv`, `entropy.csv` and
/// `environment.json` into `dir`.
pub fn write_insample_outputs(
    output: &InsampleOutput,
    config: &ExperimentConfig,
    dir: &Path,
) -> Result<()> {
    let hist_dir = dir.join("histograms");
    let trace_dir = dir.join("traces");
    fs::create_dir_all(&hist_dir)?;
    fs::create_dir_all(&trace_dir)?;

    let mut summary = csv::Writer::from_path(dir.join("entropy.csv"))?;
    for (j, (method, result)) in config.methods.iter().zip(&output.methods).enumerate() {
        let stem = file_stem(j, &method.name);
        match result {
            Ok(m) => {
                let mut w = csv::Writer::from_path(hist_dir.join(format!("{stem}.csv")))?;
                w.write_record(["method", "outcome"])?;
                for h in &m.outcomes {
                    w.write_record([m.name.as_str(), &h.to_string()])?;
                }
                w.flush()?;
                m.trace
                    .write_csv(fs::File::create(trace_dir.join(format!("{stem}.csv")))?)?;
                summary.serialize(SummaryRow {
                    method: &m.name,
                    entropy: Some(m.entropy),
                    in_sample_outcome: Some(m.in_sample_outcome),
                    bootstrap_mean: Some(m.bootstrap_mean()),
                    mass_above_logged: Some(m.mass_above(output.logged_total)),
                    true_value: Some(m.true_value),
                    error: None,
                })?;
            }
            Err(e) => summary.serialize(SummaryRow {
                method: &method.name,
                entropy: None,
                in_sample_outcome: None,
                bootstrap_mean: None,
                mass_above_logged: None,
                true_value: None,
                error: Some(e),
            })?,
        }
    }
    summary.flush()?;
    output.environment.save(dir.join("environment.json"))?;
    Ok(())
}
