//! Network data model: buses, phases, series elements, loads, sources and
//! coupling ports, plus the unknown-vector index and validation.

mod index;
mod topology;
mod types;
mod validate;

pub use index::{build_index_map, IndexMap, Part, Var};
pub use topology::{component_count, feeder_regions, FeederRegion};
pub use types::*;
pub use validate::{validate, Violation};

use thiserror::Error;

/// Structural errors that prevent building an index map.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("bus id {0} appears more than once")]
    DuplicateBus(BusId),
    #[error("bus {0} has an empty phase set")]
    EmptyPhaseSet(BusId),
    #[error("element {element} references missing bus {bus}")]
    DanglingElement { element: ElementId, bus: BusId },
}
