//! Coupling maps and construction of combined transmission-distribution networks.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::feeder::{feeder_to_network, FeederFile};
use super::{read_to_string, IngestError};
use crate::netmodel::{Bus, BusId, BusKind, CouplingPort, LoadClass, Network};

pub const COUPLING_SCHEMA: u64 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingPair {
    /// Feeder file name, resolved relative to the map.
    pub feeder: String,
    pub bus: u64,
    #[serde(default = "one")]
    pub load_scale: f64,
    #[serde(default = "one")]
    pub der_scale: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingMap {
    pub schema: u64,
    pub pairs: Vec<CouplingPair>,
}

impl CouplingMap {
    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let map: CouplingMap = serde_json::from_str(&read_to_string(path)?)?;
        map.check()?;
        Ok(map)
    }

    /// Schema version, duplicate buses and scale factors.
    pub fn check(&self) -> Result<(), IngestError> {
        if self.schema != COUPLING_SCHEMA {
            return Err(IngestError::Schema {
                found: self.schema,
                expected: COUPLING_SCHEMA,
            });
        }
        let mut seen = HashSet::new();
        for p in &self.pairs {
            if !seen.insert(p.bus) {
                return Err(IngestError::DuplicateCoupling(BusId(p.bus)));
            }
            for (what, v) in [("load_scale", p.load_scale), ("der_scale", p.der_scale)] {
                if !v.is_finite() || v < 0.0 {
                    return Err(IngestError::Invalid(format!(
                        "coupling at bus {}: {what} must be finite and non-negative, got {v}",
                        p.bus
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CombineOptions {
    /// Keep the transmission-side demand at coupled buses instead of replacing it.
    pub keep_bus_load: bool,
}

/// Smallest power of ten strictly above `n`.
fn id_stride(n: u64) -> u64 {
    let mut s = 10;
    while s <= n {
        s *= 10;
    }
    s
}

/// Attach feeders to a transmission network through coupling ports.
///
/// Feeder bus ids are renumbered `(k + 1) * stride + local_id` for the k-th
/// pair, where `stride` is a power of ten above every transmission and feeder id.
pub fn build_combined(
    transmission: &Network,
    map: &CouplingMap,
    feeders: &BTreeMap<String, FeederFile>,
    options: &CombineOptions,
) -> Result<Network, IngestError> {
    map.check()?;
    let mut net = transmission.clone();
    let max_feeder_id = feeders
        .values()
        .flat_map(|f| f.nodes.iter().map(|n| n.id))
        .max()
        .unwrap_or(0);
    let stride = id_stride(transmission.max_bus_id().max(max_feeder_id));

    for (k, pair) in map.pairs.iter().enumerate() {
        let bus = BusId(pair.bus);
        let kind = net
            .bus(bus)
            .ok_or_else(|| IngestError::UnknownBus {
                bus,
                context: "coupling map".into(),
            })?
            .kind;
        match kind {
            BusKind::Pq => {}
            BusKind::Slack => return Err(IngestError::CouplingKind { bus, kind: "slack" }),
            BusKind::Pv => return Err(IngestError::CouplingKind { bus, kind: "PV" }),
            _ => return Err(IngestError::CouplingKind { bus, kind: "distribution" }),
        }
        let file = feeders
            .get(&pair.feeder)
            .ok_or_else(|| IngestError::UnknownFeeder(pair.feeder.clone()))?;
        let mut feeder = feeder_to_network(file, net.s_base_mva)?.network;
        for load in &mut feeder.loads {
            let factor = match load.class {
                LoadClass::Der { .. } => pair.der_scale,
                _ => pair.load_scale,
            };
            load.power.iter_mut().for_each(|s| *s *= factor);
        }

        if !options.keep_bus_load {
            net.loads
                .retain(|l| !(l.bus == bus && matches!(l.class, LoadClass::Demand)));
        }

        let offset = (k as u64 + 1) * stride;
        let remap = |id: BusId| BusId(id.0 + offset);
        let element_offset = net.elements.iter().map(|e| e.id.0).max().unwrap_or(0);
        for b in feeder.buses {
            net.buses.push(Bus {
                id: remap(b.id),
                name: format!("{}:{}", file.name, b.name),
                ..b
            });
        }
        for (j, mut e) in feeder.elements.into_iter().enumerate() {
            e.id.0 = element_offset + j as u64 + 1;
            e.from = remap(e.from);
            e.to = remap(e.to);
            net.elements.push(e);
        }
        net.shunts.extend(feeder.shunts.into_iter().map(|mut s| {
            s.bus = remap(s.bus);
            s
        }));
        net.loads.extend(feeder.loads.into_iter().map(|mut l| {
            l.bus = remap(l.bus);
            l
        }));
        net.ports.push(CouplingPort {
            name: format!("{}@{}", file.name, pair.bus),
            transmission_bus: bus,
            feeder_head: remap(BusId(file.head)),
        });
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::feeder::{LineRecord, LoadRecord, NodeRecord};
    use crate::netmodel::testing::two_bus_network;
    use crate::netmodel::{validate, Connection, PhaseSet, Zip, C64};

    fn tiny_feeder() -> FeederFile {
        let z = C64::new(0.3, 0.6);
        let m = C64::new(0.1, 0.2);
        FeederFile {
            schema: 1,
            name: "tiny".into(),
            head: 1,
            nodes: vec![
                NodeRecord { id: 1, phases: PhaseSet::ABC, kv: 12.47 },
                NodeRecord { id: 2, phases: PhaseSet::ABC, kv: 12.47 },
            ],
            lines: vec![LineRecord {
                from: 1,
                to: 2,
                phases: PhaseSet::ABC,
                z: vec![vec![z, m, m], vec![m, z, m], vec![m, m, z]],
                length: 1.0,
            }],
            transformers: vec![],
            loads: vec![LoadRecord {
                node: 2,
                connection: Connection::Wye,
                kw: [500.0; 3],
                kvar: [100.0; 3],
                zip: Zip::CONSTANT_POWER,
            }],
            capacitors: vec![],
            ders: vec![],
        }
    }

    fn library() -> BTreeMap<String, FeederFile> {
        BTreeMap::from([("tiny.json".to_string(), tiny_feeder())])
    }

    fn map(buses: &[u64]) -> CouplingMap {
        CouplingMap {
            schema: 1,
            pairs: buses
                .iter()
                .map(|&b| CouplingPair {
                    feeder: "tiny.json".into(),
                    bus: b,
                    load_scale: 1.0,
                    der_scale: 1.0,
                })
                .collect(),
        }
    }

    #[test]
    fn one_port_replaces_bus_load() {
        let tx = two_bus_network();
        let net = build_combined(&tx, &map(&[2]), &library(), &CombineOptions::default()).unwrap();
        assert_eq!(net.ports.len(), 1);
        assert!(net.loads.iter().all(|l| l.bus != BusId(2)));
        assert_eq!(validate(&net), vec![]);
    }

    #[test]
    fn keep_bus_load_keeps_it() {
        let tx = two_bus_network();
        let opts = CombineOptions { keep_bus_load: true };
        let net = build_combined(&tx, &map(&[2]), &library(), &opts).unwrap();
        assert!(net.loads.iter().any(|l| l.bus == BusId(2)));
    }

    #[test]
    fn zero_load_scale_leaves_no_feeder_demand() {
        let tx = two_bus_network();
        let mut m = map(&[2]);
        m.pairs[0].load_scale = 0.0;
        let net = build_combined(&tx, &m, &library(), &CombineOptions::default()).unwrap();
        let feeder_demand: f64 = net
            .loads
            .iter()
            .filter(|l| l.bus.0 >= 10)
            .flat_map(|l| l.power.iter().map(|s| s.norm()))
            .sum();
        assert_eq!(feeder_demand, 0.0);
    }

    #[test]
    fn slack_coupling_rejected() {
        let tx = two_bus_network();
        let err = build_combined(&tx, &map(&[1]), &library(), &CombineOptions::default()).unwrap_err();
        assert!(matches!(err, IngestError::CouplingKind { kind: "slack", .. }));
    }

    #[test]
    fn duplicate_coupling_rejected() {
        let tx = two_bus_network();
        let err = build_combined(&tx, &map(&[2, 2]), &library(), &CombineOptions::default()).unwrap_err();
        assert!(matches!(err, IngestError::DuplicateCoupling(BusId(2))));
    }

    #[test]
    fn missing_feeder_named() {
        let tx = two_bus_network();
        let mut m = map(&[2]);
        m.pairs[0].feeder = "nope.json".into();
        let err = build_combined(&tx, &m, &library(), &CombineOptions::default()).unwrap_err();
        assert!(err.to_string().contains("nope.json"));
    }
}
