//! Off-policy learning of softmax policies that maximize the expectation of a
//! monotone criterion of the aggregated outcome, using a Gaussian approximation
//! of the importance-weighted aggregate.

pub mod criteria;
pub mod error;
pub mod estimators;
pub mod optimizer;
pub mod policy;
pub mod simulator;

pub use criteria::Criterion;
pub use error::{Error, Result};
pub use estimators::{AggregateStats, LoggedDataset, LoggedRecord, SampleCountMode};
pub use optimizer::{BaselineObjective, OptimizationTrace, OptimizerConfig};
pub use policy::SoftmaxPolicy;
pub use simulator::BanditEnvironment;
