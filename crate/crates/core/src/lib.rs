//! Online virtual cluster embedding: substrate topologies, request
//! workloads, a min-cost embedding oracle, primal-dual admission policies
//! and the experiment harness around them.

pub mod algorithms;
pub mod error;
pub mod metrics;
pub mod offline;
pub mod oracle;
pub mod runner;
pub mod substrate;
pub mod verify;
pub mod workload;

pub use algorithms::{AlgorithmKind, Decision, OnlineRun, PrimalDualState, StepOutcome};
pub use error::{Result, VceError};
pub use metrics::{MetricsRecorder, MetricsSeries};
pub use oracle::{CapacityView, CostVector, Embedding, PathSolver, SearchStrategy, VcAceOracle};
pub use substrate::{NodeId, EdgeId, NodeKind, SubstrateGraph};
pub use workload::{BenefitPattern, EmpiricalCostTable, RequestDomain, VcRequest};
pub use runner::{run_experiment, ExperimentConfig};
