//! Round-based simulation and scheduling library for multi-tenant GPU clusters
//! where GPU demand is fixed but CPU and memory allocations are fungible.
//!
//! The pieces compose as follows: an analytical [`oracle`] stands in for real
//! training throughput, the [`profiler`] turns a handful of oracle queries into
//! a per-job sensitivity matrix and demand vector, a [`policy`] orders the
//! queue, a [`mechanism`] packs the runnable jobs onto servers each round, the
//! [`optimizer`] computes exact per-round upper bounds, and the [`simulator`]
//! drives everything from a [`workload`] trace.

pub mod cluster;
pub mod config;
pub mod error;
pub mod job;
pub mod lp;
pub mod mechanism;
pub mod optimizer;
pub mod oracle;
pub mod policy;
pub mod presets;
pub mod profiler;
pub mod simulator;
pub mod workload;

pub use cluster::{Allocation, ClusterSpec, ClusterState, Resources, ServerSpec};
pub use error::{Result, SimError};
pub use job::{Job, JobClass, JobState, Task};
pub use mechanism::{MechanismKind, RoundPlan};
pub use policy::PolicyKind;
pub use profiler::{DemandVector, JobProfile, SensitivityMatrix};
