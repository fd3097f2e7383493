//! Scenario loading, the simulation driver, and trace/snapshot output.

mod output;
mod run;
mod scenario;
mod trace;

pub use output::{density_histogram, render_density, render_density_to, write_snapshot, write_snapshot_to, Snapshot};
pub use run::{
    initial_decomposition, initial_particles, run, run_baseline_static, run_with, ExecMode, RunOutput, SettleInfo,
};
pub use scenario::{Cylinder, DecompositionMode, ParticleInit, Scenario};
pub use trace::{
    read_trace, read_trace_from, summarize, write_trace, write_trace_to, StepRecord, TraceSummary, WorkerRow,
    TRACE_HEADER,
};

use std::path::PathBuf;

use thiserror::Error;

use crate::balance::BalanceError;
use crate::cluster::ClusterError;
use crate::geometry::GeometryError;
use crate::md::MdError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {detail}", path.display())]
    Parse { path: PathBuf, detail: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Balance(#[from] BalanceError),
    #[error(transparent)]
    Md(#[from] MdError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error("step {step}: {source}")]
    AtStep { step: u64, source: Box<HarnessError> },
}
