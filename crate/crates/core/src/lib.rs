//! Dynamic service placement for edge-enabled vehicular networks.
//!
//! The crate is split along the pipeline an experiment runs through:
//!
//! - [`scenario`]: seeded mobility and per-tick service requests, trace CSV import/export.
//! - [`compute`]: propagation and M/D/1 queueing delay, resource usage, instance sizing.
//! - [`solver`]: the exact minmax placement actor (branch-and-bound) and candidate ranking.
//! - [`critic`]: MLP value network, replay memory, training and decision loops.
//! - [`baselines`]: static, always-reoptimize and threshold-based placement schemes.
//! - [`metrics`]: delay, usage, fairness, utilization, satisfaction and re-placement cost.
//! - [`harness`]: configuration, experiment orchestration and result files.

pub mod baselines;
pub mod compute;
pub mod critic;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod scenario;
pub mod solver;

pub use error::{Error, Result};
