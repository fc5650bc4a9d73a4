//! Combined transmission and distribution power flow.
//!
//! Positive-sequence transmission buses and three-phase feeder nodes are
//! modeled as one equivalent circuit in rectangular current-injection form.
//! Feeders attach to the transmission grid through a symmetrical-component
//! coupling port. The aggregate is solved either directly by Newton-Raphson
//! (with voltage limiting and Tx-stepping homotopy) or by a parallel
//! Gauss-Seidel-Newton iteration over the feeders.

pub mod netmodel;
pub mod ingest;
pub mod circuit;
pub mod sparse;
pub mod nrsolve;
pub mod gsn;
