//! Tearing a combined network into a transmission block and feeder blocks.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::GsnError;
use crate::circuit::Circuit;
use crate::netmodel::{feeder_regions, BusId, Network, Phase, Var};

/// Largest allowed ratio of external to internal unknowns in one block.
pub const WEAK_COUPLING_RATIO: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    Transmission,
    /// A feeder pinned by a coupling port.
    Feeder { port: usize },
    /// A feeder with its own head source, not coupled to anything.
    Island,
    /// Everything, when there is nothing to tear.
    Whole,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Subcircuit {
    pub id: usize,
    pub name: String,
    pub kind: BlockKind,
    pub buses: Vec<BusId>,
    /// Global positions of every unknown this block solves for, ascending.
    pub owned: Vec<usize>,
    /// Owned unknowns that are not port unknowns.
    pub internal: Vec<usize>,
    /// Port unknowns of every port the block touches, eight per port.
    pub external: Vec<usize>,
    /// Coupling ports (network order) attached to this block.
    pub ports: Vec<usize>,
}

impl Subcircuit {
    /// Weak-coupling bound: external unknowns at most a tenth of internal ones.
    pub fn weakly_coupled(&self) -> bool {
        self.external.len() as f64 <= WEAK_COUPLING_RATIO * self.internal.len() as f64
    }
}

/// Off-diagonal band of one port: where the transmission block and a
/// feeder block meet in the bordered block-diagonal matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingBlock {
    pub port: usize,
    pub transmission: usize,
    pub feeder: usize,
    /// `(re, im)` of the positive-sequence voltage at the transmission bus.
    pub vp: (usize, usize),
    pub head_voltages: [(usize, usize); 3],
    pub head_currents: [(usize, usize); 3],
}

impl CouplingBlock {
    /// The eight port unknowns: V^p, then the three head currents.
    pub fn unknowns(&self) -> [usize; 8] {
        let c = self.head_currents;
        [self.vp.0, self.vp.1, c[0].0, c[0].1, c[1].0, c[1].1, c[2].0, c[2].1]
    }
}

/// The torn system: ordered blocks over the global unknown vector.
#[derive(Clone, Debug)]
pub struct Partition {
    circuit: Circuit,
    pub subcircuits: Vec<Subcircuit>,
    pub couplings: Vec<CouplingBlock>,
    block_of: Vec<usize>,
    bus_block: HashMap<BusId, usize>,
    pub warnings: Vec<String>,
}

impl Partition {
    /// The untorn circuit over the whole network.
    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    pub fn network(&self) -> &Network {
        self.circuit.network()
    }

    /// Block owning global position `index`.
    pub fn block_of(&self, index: usize) -> usize {
        self.block_of[index]
    }

    pub fn block_of_bus(&self, bus: BusId) -> Option<usize> {
        self.bus_block.get(&bus).copied()
    }

    /// Block sizes in ownership order; blocks own contiguous global ranges.
    pub fn block_sizes(&self) -> Vec<usize> {
        self.subcircuits.iter().map(|s| s.owned.len()).collect()
    }

    pub fn external_len(&self) -> usize {
        self.subcircuits.iter().map(|s| s.external.len()).sum()
    }

    /// One line per block breaking the weak-coupling bound.
    pub fn weak_coupling_violations(&self) -> Vec<String> {
        self.subcircuits
            .iter()
            .filter(|s| !s.external.is_empty() && !s.weakly_coupled())
            .map(|s| {
                format!(
                    "block {} ({}) has {} external vs {} internal unknowns (bound {:.0}%)",
                    s.id,
                    s.name,
                    s.external.len(),
                    s.internal.len(),
                    WEAK_COUPLING_RATIO * 100.0
                )
            })
            .collect()
    }
}

/// Tear at every coupling port.
///
/// The transmission block comes first, then one block per port-driven
/// feeder in port order, then any feeders driven by their own head source.
/// A network without ports is a single block. Blocks that break the
/// weak-coupling bound are reported in `warnings`, or refused when `strict`.
pub fn tear(network: &Network, strict: bool) -> Result<Partition, GsnError> {
    let circuit = Circuit::new(network.clone())?;
    let index = circuit.index();
    let n = index.len();

    if network.ports.is_empty() {
        let all: Vec<usize> = (0..n).collect();
        return Ok(Partition {
            subcircuits: vec![Subcircuit {
                id: 0,
                name: "whole".into(),
                kind: BlockKind::Whole,
                buses: network.buses.iter().map(|b| b.id).collect(),
                owned: all.clone(),
                internal: all,
                external: vec![],
                ports: vec![],
            }],
            couplings: vec![],
            block_of: vec![0; n],
            bus_block: network.buses.iter().map(|b| (b.id, 0)).collect(),
            warnings: vec![],
            circuit,
        });
    }

    let mut subcircuits = vec![Subcircuit {
        id: 0,
        name: "transmission".into(),
        kind: BlockKind::Transmission,
        buses: network.buses.iter().filter(|b| b.is_transmission()).map(|b| b.id).collect(),
        owned: vec![],
        internal: vec![],
        external: vec![],
        ports: (0..network.ports.len()).collect(),
    }];
    for region in feeder_regions(network) {
        let id = subcircuits.len();
        let (name, kind, ports) = match region.port {
            Some(p) => (format!("feeder {}", network.ports[p].name), BlockKind::Feeder { port: p }, vec![p]),
            None => {
                let head = region.head.map(|h| h.to_string()).unwrap_or_else(|| "?".into());
                (format!("island at {head}"), BlockKind::Island, vec![])
            }
        };
        subcircuits.push(Subcircuit {
            id,
            name,
            kind,
            buses: region.buses,
            owned: vec![],
            internal: vec![],
            external: vec![],
            ports,
        });
    }
    let bus_block: HashMap<BusId, usize> = subcircuits
        .iter()
        .flat_map(|s| s.buses.iter().map(move |&b| (b, s.id)))
        .collect();

    let mut block_of = vec![usize::MAX; n];
    for (k, var) in index.vars().iter().enumerate() {
        let bus = match *var {
            Var::Voltage { bus, .. } | Var::SlackCurrent { bus, .. } | Var::GenQ { bus } => bus,
            Var::HeadCurrent { head, .. } => head,
        };
        let block = *bus_block
            .get(&bus)
            .ok_or_else(|| GsnError::Inconsistent(format!("bus {bus} belongs to no block")))?;
        block_of[k] = block;
        subcircuits[block].owned.push(k);
    }

    let pair = |v: Option<(usize, usize)>, what: &str| {
        v.ok_or_else(|| GsnError::Inconsistent(format!("missing port unknowns for {what}")))
    };
    let mut couplings = Vec::with_capacity(network.ports.len());
    for (p, port) in network.ports.iter().enumerate() {
        let feeder = *bus_block
            .get(&port.feeder_head)
            .ok_or_else(|| GsnError::Inconsistent(format!("port {} head is in no block", port.name)))?;
        let mut head_voltages = [(0, 0); 3];
        let mut head_currents = [(0, 0); 3];
        for (k, ph) in Phase::ABC.into_iter().enumerate() {
            head_voltages[k] = pair(index.voltage_pair(port.feeder_head, ph), &port.name)?;
            head_currents[k] = pair(index.head_current_pair(port.feeder_head, ph), &port.name)?;
        }
        couplings.push(CouplingBlock {
            port: p,
            transmission: 0,
            feeder,
            vp: pair(index.voltage_pair(port.transmission_bus, Phase::P), &port.name)?,
            head_voltages,
            head_currents,
        });
    }

    let port_unknowns: HashSet<usize> = couplings.iter().flat_map(|c| c.unknowns()).collect();
    for s in &mut subcircuits {
        s.internal = s.owned.iter().copied().filter(|k| !port_unknowns.contains(k)).collect();
        s.external = couplings
            .iter()
            .filter(|c| c.transmission == s.id || c.feeder == s.id)
            .flat_map(|c| c.unknowns())
            .collect();
    }

    let mut partition = Partition {
        circuit,
        subcircuits,
        couplings,
        block_of,
        bus_block,
        warnings: vec![],
    };
    let violations = partition.weak_coupling_violations();
    if strict && !violations.is_empty() {
        return Err(GsnError::WeakCoupling(violations));
    }
    partition.warnings = violations;
    Ok(partition)
}
