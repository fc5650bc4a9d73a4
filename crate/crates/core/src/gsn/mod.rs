//! Domain decomposition of a combined network at its coupling ports and the
//! parallel Gauss-Seidel-Newton outer loop, with the convergence analysis
//! tools that go with it.

mod boundary;
mod partition;
mod solver;
mod splitting;

pub use boundary::{
    apply_feedback_augmentation, boundary_network, identify_feedback_feedforward, BoundarySnapshot, FeedbackSets,
};
pub use partition::{tear, BlockKind, CouplingBlock, Partition, Subcircuit, WEAK_COUPLING_RATIO};
pub use solver::{solve_gsn, solve_partition, BlockSummary, EpochRecord, GsnReport};
pub use splitting::{
    block_labels, build_augmented_splitting, check_diagonal_dominance, check_diagonal_dominance_sparse, to_dmatrix,
    DominanceReport, RowDominance, Splitting, DEFAULT_ALPHA,
};

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::CircuitError;
use crate::netmodel::Violation;
use crate::nrsolve::{SolveError, SolverOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GsnOptions {
    /// Options for every block's inner solve.
    pub inner: SolverOptions,
    pub outer_tolerance: f64,
    pub max_epochs: usize,
    /// Worker threads; 0 picks one per core.
    pub workers: usize,
    /// Fixed feedback value; `None` leaves it to the automatic schedule.
    pub feedback: Option<f64>,
    pub auto_feedback: bool,
    pub feedback_initial: f64,
    pub feedback_decay: f64,
    pub non_contracting_trigger: usize,
    /// Refuse partitions that break the weak-coupling bound instead of warning.
    pub strict_weak_coupling: bool,
    /// JSON-lines file receiving one record per epoch.
    pub epoch_log: Option<PathBuf>,
    /// Per-epoch progress lines on stderr.
    pub progress: bool,
}

impl Default for GsnOptions {
    fn default() -> Self {
        GsnOptions {
            inner: SolverOptions {
                max_iterations: 20,
                min_iterations: 1,
                ..Default::default()
            },
            outer_tolerance: 1e-3,
            max_epochs: 100,
            workers: 0,
            feedback: None,
            auto_feedback: true,
            feedback_initial: 10.0,
            feedback_decay: 0.5,
            non_contracting_trigger: 10,
            strict_weak_coupling: false,
            epoch_log: None,
            progress: false,
        }
    }
}

impl GsnOptions {
    pub fn check(&self) -> Result<(), GsnError> {
        self.inner.check().map_err(|e| GsnError::Options(e.to_string()))?;
        if !(self.outer_tolerance > 0.0) {
            return Err(GsnError::Options("outer tolerance must be positive".into()));
        }
        if self.max_epochs == 0 {
            return Err(GsnError::Options("at least one epoch is required".into()));
        }
        if self.feedback.is_some_and(|b| !(b >= 0.0)) || !(self.feedback_initial >= 0.0) {
            return Err(GsnError::Options("feedback values must be non-negative".into()));
        }
        if !(self.feedback_decay > 0.0 && self.feedback_decay <= 1.0) {
            return Err(GsnError::Options("feedback decay must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum GsnError {
    #[error("invalid network: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("invalid options: {0}")]
    Options(String),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error("partition breaks the weak-coupling bound: {}", .0.join("; "))]
    WeakCoupling(Vec<String>),
    #[error("internal inconsistency: {0}")]
    Inconsistent(String),
    #[error("block {id} ({name}) failed: {source}")]
    Subcircuit {
        id: usize,
        name: String,
        #[source]
        source: Box<SolveError>,
    },
    #[error("outer loop did not converge in {epochs} epochs")]
    NotConverged { epochs: usize, report: Box<GsnReport> },
    #[error("epoch log: {0}")]
    Io(String),
}

impl GsnError {
    pub fn report(&self) -> Option<&GsnReport> {
        match self {
            GsnError::NotConverged { report, .. } => Some(report),
            _ => None,
        }
    }
}
