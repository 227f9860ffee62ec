//! Experiment configuration files.

use std::path::{Path, PathBuf};

use aggropt_core::estimators::default_ls_lambda;
use aggropt_core::simulator::EnvironmentSpec;
use aggropt_core::{Criterion, OptimizerConfig, SampleCountMode};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Confidence level behind the default logarithmic-smoothing λ.
pub const LS_DELTA: f64 = 0.05;

/// A criterion as written in a config file. `threshold_uplift` is resolved
/// against the logged aggregate of each dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CriterionSpec {
    Identity,
    Power { kappa: f64 },
    Threshold { xbar: f64 },
    ThresholdUplift { uplift: f64 },
}

impl CriterionSpec {
    pub fn resolve(&self, logged_total: f64) -> Criterion {
        match *self {
            CriterionSpec::Identity => Criterion::Identity,
            CriterionSpec::Power { kappa } => Criterion::Power { kappa },
            CriterionSpec::Threshold { xbar } => Criterion::Threshold { xbar },
            CriterionSpec::ThresholdUplift { uplift } => Criterion::Threshold {
                xbar: (1.0 + uplift) * logged_total,
            },
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            CriterionSpec::ThresholdUplift { uplift } if !uplift.is_finite() => Err(
                HarnessError::Config(format!("threshold uplift must be finite, got {uplift}")),
            ),
            CriterionSpec::ThresholdUplift { .. } => Ok(()),
            other => other
                .resolve(0.0)
                .validate()
                .map_err(|e| HarnessError::Config(e.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Objective {
    /// The logging policy itself, untrained.
    LoggingPolicy,
    Ips,
    /// `lambda` defaults to `√(ln(1/δ)/n)` with `δ = 0.05`.
    Ls {
        #[serde(default)]
        lambda: Option<f64>,
    },
    Criterion { criterion: CriterionSpec },
}

impl Objective {
    pub fn ls_lambda(&self, n: usize) -> Option<f64> {
        match *self {
            Objective::Ls { lambda } => Some(lambda.unwrap_or_else(|| default_ls_lambda(n, LS_DELTA))),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// Warm start at the logging policy's parameters.
    Logging,
    /// `θ = 0`.
    #[default]
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub name: String,
    pub objective: Objective,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub init: Init,
}

/// What the improvement `I = value/baseline − 1` is measured against.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImprovementBaseline {
    /// The true expected reward of the logging policy.
    #[default]
    TrueValue,
    /// The replication's logged reward total divided by the expected sample count.
    Logged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub environment_seed: u64,
    pub environment: EnvironmentSpec,
    /// Expected number of logged interactions per replication.
    pub n: f64,
    pub sample_count_mode: SampleCountMode,
    pub num_replications: usize,
    pub base_seed: u64,
    pub workers: usize,
    pub output_dir: PathBuf,
    /// Improvement levels reported as `P(I > t)`, strictly increasing.
    pub thresholds: Vec<f64>,
    pub improvement_baseline: ImprovementBaseline,
    /// Resamples per method in the in-sample analysis.
    pub bootstrap_resamples: usize,
    pub methods: Vec<MethodConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            environment_seed: 0,
            environment: EnvironmentSpec::default(),
            n: 1000.0,
            sample_count_mode: SampleCountMode::FixedN,
            num_replications: 100,
            base_seed: 0,
            workers: 1,
            output_dir: PathBuf::from("out"),
            thresholds: vec![0.1, 0.2, 0.3],
            improvement_baseline: ImprovementBaseline::TrueValue,
            bootstrap_resamples: 2000,
            methods: Vec::new(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self =
            serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.num_replications == 0 {
            return bad("num_replications must be at least 1".into());
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if !(self.n > 0.0 && self.n.is_finite()) {
            return bad(format!("n must be positive, got {}", self.n));
        }
        if self.sample_count_mode == SampleCountMode::FixedN && self.n.fract() != 0.0 {
            return bad(format!("n must be an integer for fixed_n datasets, got {}", self.n));
        }
        if self.thresholds.iter().any(|t| !t.is_finite()) {
            return bad("thresholds must be finite".into());
        }
        if self.thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return bad("thresholds must be strictly increasing".into());
        }
        if self.bootstrap_resamples == 0 {
            return bad("bootstrap_resamples must be at least 1".into());
        }
        let mut names = std::collections::HashSet::new();
        for m in &self.methods {
            if m.name.is_empty() {
                return bad("method names must be non-empty".into());
            }
            if !names.insert(m.name.as_str()) {
                return bad(format!("duplicate method name {:?}", m.name));
            }
            m.optimizer
                .validate()
                .map_err(|e| HarnessError::Config(format!("method {:?}: {e}", m.name)))?;
            match m.objective {
                Objective::Ls { lambda: Some(l) } if !(l >= 0.0 && l.is_finite()) => {
                    return bad(format!("method {:?}: lambda must be nonnegative", m.name));
                }
                Objective::Criterion { criterion } => criterion
                    .validate()
                    .map_err(|e| HarnessError::Config(format!("method {:?}: {e}", m.name)))?,
                _ => {}
            }
        }
        Ok(())
    }
}
