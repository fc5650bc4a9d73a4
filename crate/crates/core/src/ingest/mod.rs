//! Readers for transmission cases, feeder descriptions and coupling maps,
//! and construction of combined networks from them.

mod combine;
mod feeder;
mod matpower;

pub use combine::{build_combined, CombineOptions, CouplingMap, CouplingPair};
pub use feeder::{
    feeder_to_network, network_to_feeder, parse_feeder, CapacitorRecord, DerRecord, Feeder, FeederFile, LineRecord,
    LoadRecord, NodeRecord, TransformerConnection, TransformerRecord,
};
pub use matpower::{parse_matpower, parse_transmission, MatpowerCase};

use std::path::PathBuf;

use thiserror::Error;

use crate::netmodel::BusId;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("invalid document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported schema version {found} (expected {expected})")]
    Schema { found: u64, expected: u64 },
    #[error("{context} references unknown bus {bus}")]
    UnknownBus { bus: BusId, context: String },
    #[error("line {line}: branch {from}-{to} has zero impedance")]
    ZeroImpedance { line: usize, from: BusId, to: BusId },
    #[error("{element}: impedance block is singular")]
    SingularImpedance { element: String },
    #[error("{element}: impedance block is not symmetric")]
    AsymmetricImpedance { element: String },
    #[error("{element}: {message}")]
    PhaseMismatch { element: String, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error("coupling bus {bus} is a {kind} bus; feeders may only attach to PQ buses")]
    CouplingKind { bus: BusId, kind: &'static str },
    #[error("bus {0} appears more than once in the coupling map")]
    DuplicateCoupling(BusId),
    #[error("coupling map names feeder {0:?} which was not supplied")]
    UnknownFeeder(String),
}

pub(crate) fn read_to_string(path: &std::path::Path) -> Result<String, IngestError> {
    std::fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}
