use serde::{Deserialize, Serialize};

use crate::netmodel::{PhaseMatrix, C64};

/// Tx-stepping homotopy parameters. `lambda = 0` is the original circuit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomotopyState {
    pub lambda: f64,
    pub gamma: f64,
    /// Scale shunts by `1 - lambda` toward open circuit.
    pub relax_shunts: bool,
}

pub const DEFAULT_GAMMA: f64 = 1e3;

impl HomotopyState {
    pub fn new(lambda: f64, gamma: f64, relax_shunts: bool) -> Self {
        assert!((0.0..=1.0).contains(&lambda), "homotopy factor {lambda} outside [0, 1]");
        assert!(gamma > 0.0, "homotopy scale must be positive");
        HomotopyState {
            lambda,
            gamma,
            relax_shunts,
        }
    }

    /// The original circuit.
    pub fn off() -> Self {
        HomotopyState::new(0.0, DEFAULT_GAMMA, true)
    }

    pub fn with_lambda(self, lambda: f64) -> Self {
        HomotopyState::new(lambda, self.gamma, self.relax_shunts)
    }

    pub fn series_scale(&self) -> f64 {
        1.0 + self.lambda * self.gamma
    }

    pub fn shunt_scale(&self) -> f64 {
        if self.relax_shunts {
            1.0 - self.lambda
        } else {
            1.0
        }
    }
}

impl Default for HomotopyState {
    fn default() -> Self {
        HomotopyState::off()
    }
}

/// Scale a positive-sequence series admittance by `1 + lambda * gamma`.
pub fn apply_homotopy_positive_sequence(y: C64, state: &HomotopyState) -> C64 {
    y * state.series_scale()
}

/// Scale the diagonal of a phase block by `1 + gamma * lambda`; mutuals are untouched.
pub fn apply_homotopy_three_phase(y: &PhaseMatrix, state: &HomotopyState) -> PhaseMatrix {
    let mut out = *y;
    let k = state.series_scale();
    for i in 0..3 {
        out.0[i][i] *= k;
    }
    out
}
