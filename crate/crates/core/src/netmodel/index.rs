use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::topology::feeder_regions;
use super::types::{BusId, BusKind, Network, Phase};
use super::NetworkError;

/// Real or imaginary component of a complex quantity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Part {
    Re,
    Im,
}

impl Part {
    pub const BOTH: [Part; 2] = [Part::Re, Part::Im];
}

/// One entry of the MNA unknown vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Var {
    Voltage { bus: BusId, phase: Phase, part: Part },
    /// Current injected by a slack source into its bus.
    SlackCurrent { bus: BusId, part: Part },
    /// Reactive output of the generator at a PV bus.
    GenQ { bus: BusId },
    /// Current delivered into a feeder head by a coupling port or head source.
    HeadCurrent { head: BusId, phase: Phase, part: Part },
}

impl Var {
    pub fn is_voltage(&self) -> bool {
        matches!(self, Var::Voltage { .. })
    }
}

/// Bijection between [`Var`]s and positions `0..n` of the unknown vector.
///
/// Transmission unknowns come first (bus voltages, slack currents, PV
/// reactive outputs), then each feeder region in turn (its bus voltages
/// followed by the six head currents of its port or source).
#[derive(Clone, Debug, PartialEq)]
pub struct IndexMap {
    vars: Vec<Var>,
    lookup: HashMap<Var, usize>,
    transmission_len: usize,
}

impl IndexMap {
    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn get(&self, var: &Var) -> Option<usize> {
        self.lookup.get(var).copied()
    }

    pub fn var(&self, index: usize) -> Var {
        self.vars[index]
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    /// Number of leading positions holding transmission unknowns.
    pub fn transmission_len(&self) -> usize {
        self.transmission_len
    }

    pub fn voltage(&self, bus: BusId, phase: Phase, part: Part) -> Option<usize> {
        self.get(&Var::Voltage { bus, phase, part })
    }

    /// `(re, im)` positions of a nodal voltage.
    pub fn voltage_pair(&self, bus: BusId, phase: Phase) -> Option<(usize, usize)> {
        Some((
            self.voltage(bus, phase, Part::Re)?,
            self.voltage(bus, phase, Part::Im)?,
        ))
    }

    pub fn head_current_pair(&self, head: BusId, phase: Phase) -> Option<(usize, usize)> {
        Some((
            self.get(&Var::HeadCurrent { head, phase, part: Part::Re })?,
            self.get(&Var::HeadCurrent { head, phase, part: Part::Im })?,
        ))
    }

    pub fn slack_current_pair(&self, bus: BusId) -> Option<(usize, usize)> {
        Some((
            self.get(&Var::SlackCurrent { bus, part: Part::Re })?,
            self.get(&Var::SlackCurrent { bus, part: Part::Im })?,
        ))
    }

    pub fn gen_q(&self, bus: BusId) -> Option<usize> {
        self.get(&Var::GenQ { bus })
    }

    fn push(&mut self, var: Var) {
        self.lookup.insert(var, self.vars.len());
        self.vars.push(var);
    }
}

/// Assign every nodal voltage and auxiliary unknown a unique, deterministic position.
pub fn build_index_map(network: &Network) -> Result<IndexMap, NetworkError> {
    let mut seen = HashSet::new();
    for bus in &network.buses {
        if !seen.insert(bus.id) {
            return Err(NetworkError::DuplicateBus(bus.id));
        }
        if bus.phases.is_empty() {
            return Err(NetworkError::EmptyPhaseSet(bus.id));
        }
    }
    for e in &network.elements {
        for end in [e.from, e.to] {
            if !seen.contains(&end) {
                return Err(NetworkError::DanglingElement { element: e.id, bus: end });
            }
        }
    }

    let mut map = IndexMap {
        vars: Vec::new(),
        lookup: HashMap::new(),
        transmission_len: 0,
    };

    for bus in network.buses.iter().filter(|b| b.is_transmission()) {
        for phase in bus.phases.iter() {
            for part in Part::BOTH {
                map.push(Var::Voltage { bus: bus.id, phase, part });
            }
        }
    }
    for slack in &network.slacks {
        for part in Part::BOTH {
            map.push(Var::SlackCurrent { bus: slack.bus, part });
        }
    }
    for bus in network.buses.iter().filter(|b| b.kind == BusKind::Pv) {
        map.push(Var::GenQ { bus: bus.id });
    }
    map.transmission_len = map.vars.len();

    let regions = feeder_regions(network);
    let mut placed = HashSet::new();
    for region in &regions {
        for &bus_id in &region.buses {
            let bus = network.bus(bus_id).expect("region bus exists");
            for phase in bus.phases.iter() {
                for part in Part::BOTH {
                    map.push(Var::Voltage { bus: bus_id, phase, part });
                }
            }
            placed.insert(bus_id);
        }
        if let Some(head) = region.head {
            if region.driven {
                for phase in Phase::ABC {
                    for part in Part::BOTH {
                        map.push(Var::HeadCurrent { head, phase, part });
                    }
                }
            }
        }
    }
    // Distribution buses outside any region (validation reports them).
    for bus in network.buses.iter().filter(|b| !b.is_transmission() && !placed.contains(&b.id)) {
        for phase in bus.phases.iter() {
            for part in Part::BOTH {
                map.push(Var::Voltage { bus: bus.id, phase, part });
            }
        }
    }
    Ok(map)
}
