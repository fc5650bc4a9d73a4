//! MNA stamping: linear element stamps, Norton linearization of loads and
//! generators, the symmetrical-component coupling port and Tx-stepping homotopy.

mod homotopy;
mod loads;
mod port;
mod stamp;

pub use homotopy::{apply_homotopy_positive_sequence, apply_homotopy_three_phase, HomotopyState, DEFAULT_GAMMA};
pub use loads::{eval_pq_positive_sequence, eval_pq_three_phase, eval_zip, PqEval, ThreePhaseEval, V_EPSILON};
pub use port::{
    port_current_matrix, port_phase_voltages, positive_sequence_current, rotation_block, sequence_components,
};
pub use stamp::{Circuit, Controls};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netmodel::{BusId, NetworkError, Phase};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CircuitError {
    #[error("voltage collapse at bus {bus} phase {phase}: |V| = {magnitude:.3e}")]
    VoltageCollapse { bus: BusId, phase: Phase, magnitude: f64 },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("{0}")]
    Inconsistent(String),
    #[error("stamp at ({row}, {col}) outside dimension {n} or not finite")]
    BadStamp { row: usize, col: usize, n: usize },
}

/// Matrix triplets and right-hand-side entries for one linearization.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StampSet {
    pub triplets: Vec<(usize, usize, f64)>,
    pub rhs: Vec<(usize, f64)>,
    pub iteration: usize,
}

impl StampSet {
    pub fn new(iteration: usize) -> Self {
        StampSet {
            iteration,
            ..Default::default()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty() && self.rhs.is_empty()
    }

    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        self.triplets.push((row, col, value));
    }

    pub fn add_rhs(&mut self, row: usize, value: f64) {
        self.rhs.push((row, value));
    }

    /// Stamp `I = y V` between a row pair and a column pair in rectangular form.
    pub fn add_complex(&mut self, rows: (usize, usize), cols: (usize, usize), y: num_complex::Complex64) {
        self.add(rows.0, cols.0, y.re);
        self.add(rows.0, cols.1, -y.im);
        self.add(rows.1, cols.0, y.im);
        self.add(rows.1, cols.1, y.re);
    }

    /// Add a complex right-hand-side value to a row pair.
    pub fn add_rhs_complex(&mut self, rows: (usize, usize), value: num_complex::Complex64) {
        self.add_rhs(rows.0, value.re);
        self.add_rhs(rows.1, value.im);
    }

    pub fn extend(&mut self, other: &StampSet) {
        self.triplets.extend_from_slice(&other.triplets);
        self.rhs.extend_from_slice(&other.rhs);
    }

    /// Every index below `n` and every value finite.
    pub fn check(&self, n: usize) -> Result<(), CircuitError> {
        for &(row, col, v) in &self.triplets {
            if row >= n || col >= n || !v.is_finite() {
                return Err(CircuitError::BadStamp { row, col, n });
            }
        }
        for &(row, v) in &self.rhs {
            if row >= n || !v.is_finite() {
                return Err(CircuitError::BadStamp { row, col: row, n });
            }
        }
        Ok(())
    }

    /// `A x - b` without forming a matrix.
    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut f = vec![0.0; x.len()];
        for &(r, c, v) in &self.triplets {
            f[r] += v * x[c];
        }
        for &(r, v) in &self.rhs {
            f[r] -= v;
        }
        f
    }
}
