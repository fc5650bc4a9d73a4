//! Tx-stepping schedule for the homotopy factor.
//!
//! Escalation raises lambda after failures until some point converges;
//! relaxation then walks back toward zero from the last converged point,
//! halving the step on failure and doubling it on success.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error("homotopy failed to converge even at lambda = 1")]
    Exhausted,
    #[error("homotopy step fell below {min_step} with lambda still at {smallest_lambda}")]
    Underflow { smallest_lambda: f64, min_step: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Phase {
    Escalating,
    Relaxing,
    Done,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HomotopySchedule {
    phase: Phase,
    step: f64,
    min_step: f64,
    /// The point being (or about to be) attempted.
    current: f64,
    /// Smallest lambda that converged so far.
    converged: Option<f64>,
}

impl HomotopySchedule {
    /// Start escalating from `lambda`.
    pub fn new(lambda: f64, initial_step: f64, min_step: f64) -> Self {
        assert!((0.0..=1.0).contains(&lambda));
        HomotopySchedule {
            phase: Phase::Escalating,
            step: initial_step,
            min_step,
            current: lambda,
            converged: None,
        }
    }

    pub fn current(&self) -> f64 {
        self.current
    }

    pub fn smallest_converged(&self) -> Option<f64> {
        self.converged
    }

    pub fn is_done(&self) -> bool {
        self.phase == Phase::Done
    }

    /// Whether the next attempt should warm-start from the last converged state.
    pub fn warm_start(&self) -> bool {
        self.phase == Phase::Relaxing
    }

    /// Record the outcome at `current()` and pick the next lambda.
    /// Returns `Ok(None)` once lambda = 0 has converged.
    pub fn advance(&mut self, converged: bool) -> Result<Option<f64>, ScheduleError> {
        match (self.phase, converged) {
            (Phase::Done, _) => Ok(None),
            (_, true) if self.current == 0.0 => {
                self.converged = Some(0.0);
                self.phase = Phase::Done;
                Ok(None)
            }
            (Phase::Escalating, true) => {
                self.converged = Some(self.current);
                self.phase = Phase::Relaxing;
                self.step = self.current / 2.0;
                self.current -= self.step;
                Ok(Some(self.current))
            }
            (Phase::Escalating, false) => {
                if self.current >= 1.0 {
                    return Err(ScheduleError::Exhausted);
                }
                self.current = (self.current + self.step).min(1.0);
                self.step = (self.step * 2.0).min(1.0);
                Ok(Some(self.current))
            }
            (Phase::Relaxing, true) => {
                self.converged = Some(self.current);
                self.step = (self.step * 2.0).min(self.current);
                self.current = (self.current - self.step).max(0.0);
                Ok(Some(self.current))
            }
            (Phase::Relaxing, false) => {
                let base = self.converged.expect("relaxing starts from a converged point");
                self.step /= 2.0;
                if self.step < self.min_step {
                    return Err(ScheduleError::Underflow {
                        smallest_lambda: base,
                        min_step: self.min_step,
                    });
                }
                self.current = base - self.step;
                Ok(Some(self.current))
            }
        }
    }
}
