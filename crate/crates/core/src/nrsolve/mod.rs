//! Robust direct Newton-Raphson: voltage limiting, divergence detection,
//! Tx-stepping homotopy schedule and the reactive-limit control loop.

mod direct;
mod limit;
mod qlimits;
mod schedule;

pub use direct::{newton, solve_circuit, solve_circuit_from, solve_direct, NewtonOutcome, Solution, StopReason};
pub use limit::{apply_voltage_limit, detect_divergence, limit_step};
pub use qlimits::{enforce_q_limits, QLimitGuard, QSwitch, SwitchKind};
pub use schedule::{HomotopySchedule, ScheduleError};

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::CircuitError;
use crate::netmodel::Violation;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HomotopyMode {
    /// Plain Newton first; Tx stepping only after a failure.
    Auto,
    /// Start at lambda = 1 and relax to the original circuit.
    On,
    Off,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Infinity-norm bound on the nonlinear mismatch.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Iterations to run even when the start point already meets the tolerance.
    pub min_iterations: usize,
    pub limiting: bool,
    pub dv_max: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub homotopy: HomotopyMode,
    pub gamma: f64,
    pub relax_shunts: bool,
    pub lambda_step: f64,
    pub lambda_min_step: f64,
    pub divergence_window: usize,
    pub divergence_ratio: f64,
    pub q_limits: bool,
    /// Switches per bus before it is frozen at its limit.
    pub max_q_switches: usize,
    pub max_control_rounds: usize,
    /// Ignore stored initial voltages and start flat.
    pub flat_start: bool,
    /// Keep the state reached at every converged homotopy step.
    pub record_homotopy_states: bool,
    /// Write the last assembled matrix here (MatrixMarket).
    pub dump_matrix: Option<PathBuf>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance: 1e-6,
            max_iterations: 100,
            min_iterations: 0,
            limiting: true,
            dv_max: 0.1,
            v_min: -2.0,
            v_max: 2.0,
            homotopy: HomotopyMode::Auto,
            gamma: crate::circuit::DEFAULT_GAMMA,
            relax_shunts: true,
            lambda_step: 0.1,
            lambda_min_step: 1e-4,
            divergence_window: 3,
            divergence_ratio: 1e3,
            q_limits: true,
            max_q_switches: 5,
            max_control_rounds: 20,
            flat_start: false,
            record_homotopy_states: false,
            dump_matrix: None,
        }
    }
}

impl SolverOptions {
    pub fn check(&self) -> Result<(), SolveError> {
        let bad = |m: &str| Err(SolveError::Options(m.to_string()));
        if !(self.tolerance > 0.0) {
            return bad("tolerance must be positive");
        }
        if !(self.dv_max > 0.0) {
            return bad("dv_max must be positive");
        }
        if !(self.v_min < self.v_max) {
            return bad("v_min must be below v_max");
        }
        if !(self.gamma > 0.0) {
            return bad("gamma must be positive");
        }
        if !(self.lambda_step > 0.0 && self.lambda_step <= 1.0) {
            return bad("lambda_step must lie in (0, 1]");
        }
        if !(self.lambda_min_step > 0.0) {
            return bad("lambda_min_step must be positive");
        }
        if self.max_iterations == 0 || self.divergence_window == 0 {
            return bad("iteration limit and divergence window must be at least 1");
        }
        Ok(())
    }
}

/// One homotopy stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaStep {
    pub lambda: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomotopyPoint {
    pub lambda: f64,
    pub state: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub converged: bool,
    pub iterations: usize,
    pub final_residual: f64,
    pub lambda_trajectory: Vec<LambdaStep>,
    pub q_switches: Vec<QSwitch>,
    /// Mismatch at the start of every Newton iteration, across all stages.
    pub residual_history: Vec<f64>,
    /// Largest relative linear-solve residual seen.
    pub max_linear_residual: f64,
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub homotopy_states: Vec<HomotopyPoint>,
}

impl SolveReport {
    pub fn homotopy_engaged(&self) -> bool {
        self.lambda_trajectory.iter().any(|s| s.lambda > 0.0)
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("invalid network: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("invalid solver options: {0}")]
    Options(String),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error("case is unsolvable: {reason} (smallest homotopy factor reached {smallest_lambda})")]
    Unsolvable {
        reason: String,
        smallest_lambda: f64,
        report: Box<SolveReport>,
    },
}

impl SolveError {
    pub fn report(&self) -> Option<&SolveReport> {
        match self {
            SolveError::Unsolvable { report, .. } => Some(report),
            _ => None,
        }
    }
}
