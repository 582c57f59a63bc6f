//! Experiment harness: configuration ingestion, batch execution with
//! invariant re-validation, the economic-dispatch demo, the privacy
//! comparison, plot-data emission, and a fast self-check suite.
//!
//! Everything here is concrete over `f64`.

pub mod compare;
pub mod config;
pub mod experiment;
pub mod figures;
pub mod opd;
pub mod presets;
pub mod verify;

use thiserror::Error;

use crate::graph::GraphError;
use crate::protocols::ProtocolError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

pub use compare::{compare_privacy, CompareParams, ComparisonReport};
pub use config::{
    AttackSelection, ExperimentConfig, GraphSource, IndistConfig, MonteCarloConfig, RunConfig,
};
pub use experiment::{resolve_out_dir, run_experiment, ExperimentSummary};
pub use figures::{deviation_triple_csv, trajectories_long_csv};
pub use opd::{opd_dispatch, run_opd_demo, OpdOutcome};
pub use presets::{
    default_delta, default_horizon, demo_graph, OPD_ADVERSARY, OPD_ALPHA, OPD_BETA, OPD_DEMAND,
};
pub use verify::{run_invariant_suite, CheckResult};
