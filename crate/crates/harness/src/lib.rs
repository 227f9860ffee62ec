//! Config-driven replication study and in-sample analysis for
//! counterfactual aggregate optimization.

pub mod config;
pub mod error;
pub mod insample;
pub mod report;
pub mod study;
pub mod train;

pub use config::{ExperimentConfig, MethodConfig, Objective};
pub use error::{HarnessError, Result};
pub use insample::{run_insample_analysis, write_insample_outputs, InsampleOutput};
pub use report::{render_table, ReplicationReport};
pub use study::{run_replication_study, write_study_outputs, StudyOutput};
