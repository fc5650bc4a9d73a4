//! Boundary exchange between blocks: the epoch snapshot, the torn
//! subnetworks it drives, and the feedback/feedforward node sets.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::partition::{BlockKind, Partition};
use super::GsnError;
use crate::circuit::{positive_sequence_current, HomotopyState};
use crate::netmodel::{BusId, CurrentInjection, HeadSource, Network, Phase, Var, C64};

/// Values of every block's external unknowns at the start of an epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundarySnapshot {
    pub epoch: usize,
    /// Global positions, block by block in external order.
    pub positions: Vec<usize>,
    pub values: Vec<f64>,
}

impl BoundarySnapshot {
    pub fn capture(partition: &Partition, x: &[f64], epoch: usize) -> Self {
        let positions: Vec<usize> = partition
            .subcircuits
            .iter()
            .flat_map(|s| s.external.iter().copied())
            .collect();
        let values = positions.iter().map(|&k| x[k]).collect();
        BoundarySnapshot {
            epoch,
            positions,
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn value(&self, position: usize) -> f64 {
        let k = self
            .positions
            .iter()
            .position(|&p| p == position)
            .expect("position is a port unknown");
        self.values[k]
    }

    fn complex(&self, pair: (usize, usize)) -> C64 {
        C64::new(self.value(pair.0), self.value(pair.1))
    }

    /// Transmission-side voltage of a port.
    pub fn port_voltage(&self, partition: &Partition, port: usize) -> C64 {
        self.complex(partition.couplings[port].vp)
    }

    /// Phase currents delivered into a port's feeder head.
    pub fn port_currents(&self, partition: &Partition, port: usize) -> [C64; 3] {
        partition.couplings[port].head_currents.map(|p| self.complex(p))
    }

    /// Infinity norm of the change against an earlier snapshot.
    pub fn max_change(&self, earlier: &BoundarySnapshot) -> f64 {
        self.values
            .iter()
            .zip(&earlier.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Self-contained network of one block with its ports replaced by sources
/// fixed at the snapshot. Feeder heads get an ideal source at the
/// transmission voltage; transmission buses get the feeder current as an
/// injection.
pub fn boundary_network(
    partition: &Partition,
    block: usize,
    snapshot: &BoundarySnapshot,
    feedback: f64,
) -> Network {
    let net = partition.network();
    let sub = &partition.subcircuits[block];
    if sub.kind == BlockKind::Whole {
        return net.clone();
    }
    let inside: BTreeSet<BusId> = sub.buses.iter().copied().collect();
    let has = |b: &BusId| inside.contains(b);
    let mut out = Network {
        name: format!("{} / {}", net.name, sub.name),
        s_base_mva: net.s_base_mva,
        buses: net.buses.iter().filter(|b| has(&b.id)).cloned().collect(),
        elements: net
            .elements
            .iter()
            .filter(|e| has(&e.from) && has(&e.to))
            .cloned()
            .collect(),
        shunts: net.shunts.iter().filter(|s| has(&s.bus)).cloned().collect(),
        loads: net.loads.iter().filter(|l| has(&l.bus)).cloned().collect(),
        generators: net.generators.iter().filter(|g| has(&g.bus)).cloned().collect(),
        slacks: net.slacks.iter().filter(|s| has(&s.bus)).cloned().collect(),
        ports: vec![],
        head_sources: net.head_sources.iter().filter(|h| has(&h.bus)).cloned().collect(),
        injections: net.injections.iter().filter(|i| has(&i.bus)).cloned().collect(),
    };
    match sub.kind {
        BlockKind::Transmission => {
            for &p in &sub.ports {
                let port = &net.ports[p];
                let current = positive_sequence_current(snapshot.port_currents(partition, p));
                let vp = snapshot.port_voltage(partition, p);
                out.injections.push(CurrentInjection {
                    bus: port.transmission_bus,
                    current: current - vp * feedback,
                    conductance: feedback,
                });
            }
        }
        BlockKind::Feeder { port } => {
            out.head_sources.push(HeadSource {
                bus: net.ports[port].feeder_head,
                voltage: snapshot.port_voltage(partition, port),
                feedback,
            });
        }
        BlockKind::Island | BlockKind::Whole => {}
    }
    out
}

/// Every block's boundary network with feedback elements of value `b_fb`
/// at the feeder heads and the matching compensation on the transmission side.
pub fn apply_feedback_augmentation(partition: &Partition, snapshot: &BoundarySnapshot, b_fb: f64) -> Vec<Network> {
    (0..partition.subcircuits.len())
        .map(|k| boundary_network(partition, k, snapshot, b_fb))
        .collect()
}

/// Feedback and feedforward unknowns as global positions.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FeedbackSets {
    pub feedback: Vec<usize>,
    pub feedforward: Vec<usize>,
}

/// Declared sets (feeder-head voltages are feedback, transmission port
/// voltages feedforward), checked against the Jacobian pattern of the
/// untorn circuit.
///
/// A row reaching into an earlier block marks its node as feedback; a row
/// reaching into a later block marks its node as feedforward. Source rows
/// stand for the head node they pin.
pub fn identify_feedback_feedforward(partition: &Partition) -> Result<FeedbackSets, GsnError> {
    let mut declared = FeedbackSets::default();
    for c in &partition.couplings {
        declared.feedforward.extend([c.vp.0, c.vp.1]);
        for (r, i) in c.head_voltages {
            declared.feedback.extend([r, i]);
        }
    }
    declared.feedback.sort_unstable();
    declared.feedforward.sort_unstable();
    declared.feedback.dedup();
    declared.feedforward.dedup();

    let scanned = scan_pattern(partition)?;
    if scanned != declared {
        return Err(GsnError::Inconsistent(format!(
            "Jacobian pattern marks feedback {:?} and feedforward {:?}, expected {:?} and {:?}",
            scanned.feedback, scanned.feedforward, declared.feedback, declared.feedforward
        )));
    }
    Ok(declared)
}

fn scan_pattern(partition: &Partition) -> Result<FeedbackSets, GsnError> {
    let circuit = partition.circuit();
    let index = circuit.index();
    let x = circuit.initial_state();
    let st = circuit.stamps(&x, &HomotopyState::off(), &Default::default(), 0)?;

    // Positions of the node a row belongs to.
    let node_of = |row: usize| -> Option<(usize, usize)> {
        match index.var(row) {
            Var::Voltage { bus, phase, .. } => index.voltage_pair(bus, phase),
            Var::HeadCurrent { head, phase, .. } => index.voltage_pair(head, phase),
            Var::SlackCurrent { bus, .. } => index.voltage_pair(bus, Phase::P),
            Var::GenQ { bus } => index.voltage_pair(bus, Phase::P),
        }
    };

    let mut feedback = BTreeSet::new();
    let mut feedforward = BTreeSet::new();
    for &(row, col, v) in &st.triplets {
        if v == 0.0 {
            continue;
        }
        let (br, bc) = (partition.block_of(row), partition.block_of(col));
        if br == bc {
            continue;
        }
        let Some((re, im)) = node_of(row) else { continue };
        let set = if bc < br { &mut feedback } else { &mut feedforward };
        set.insert(re);
        set.insert(im);
    }
    Ok(FeedbackSets {
        feedback: feedback.into_iter().collect(),
        feedforward: feedforward.into_iter().collect(),
    })
}
