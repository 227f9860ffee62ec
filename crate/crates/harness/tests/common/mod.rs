#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

/// A few replications on a 40-action environment; runs in well under a second.
pub const SMALL_CONFIG: &str = r#"{
  "environment": {"num_actions": 40, "beta": 5.0},
  "n": 300,
  "sample_count_mode": "fixed_n",
  "num_replications": 4,
  "workers": 2,
  "bootstrap_resamples": 200,
  "methods": [
    {"name": "pi0", "objective": {"type": "logging_policy"}},
    {"name": "IPS", "objective": {"type": "ips"}, "optimizer": {"iterations": 50}},
    {"name": "LS", "objective": {"type": "ls"}, "optimizer": {"iterations": 50}},
    {"name": "t10", "init": "logging",
     "objective": {"type": "criterion", "criterion": {"type": "threshold_uplift", "uplift": 0.1}},
     "optimizer": {"learning_rate": 10.0, "gaussian_samples": 500, "iterations": 50}}
  ]
}"#;

pub const LINT_FIXTURE: &str = "context,action,reward,propensity
0,1,1,0.1
0,2,0,0.2
0,3,1,0
0,4,0,0.25
0,5,1,0.1
0,1,-1,0.1
0,2,0,0.2
0,12,1,0.1
0,3,0,0.3
0,4,1,0.05
";

pub fn aggropt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aggropt")).args(args).output().unwrap()
}

pub fn read_tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    out
}
