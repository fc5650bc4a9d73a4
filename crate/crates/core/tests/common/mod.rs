#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use tdflow::ingest::{build_combined, parse_transmission, CombineOptions, CouplingMap, CouplingPair, FeederFile};
use tdflow::netmodel::Network;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn transmission(name: &str) -> Network {
    parse_transmission(&data_dir().join(name)).unwrap()
}

pub fn feeder_file(name: &str) -> FeederFile {
    let text = std::fs::read_to_string(data_dir().join("feeders").join(name)).unwrap();
    serde_json::from_str(&text).unwrap()
}

/// `feeder` attached at every bus in `buses`.
pub fn with_feeders(t: &Network, feeder: &str, buses: &[u64]) -> Network {
    let map = CouplingMap {
        schema: 1,
        pairs: buses
            .iter()
            .map(|&bus| CouplingPair {
                feeder: feeder.into(),
                bus,
                load_scale: 1.0,
                der_scale: 1.0,
            })
            .collect(),
    };
    let mut feeders = BTreeMap::new();
    feeders.insert(feeder.to_string(), feeder_file(feeder));
    build_combined(t, &map, &feeders, &CombineOptions::default()).unwrap()
}

/// Largest |V| difference over every bus phase present in both.
pub fn max_magnitude_gap(a: &tdflow::nrsolve::Solution, b: &tdflow::nrsolve::Solution) -> f64 {
    let mut gap = 0.0f64;
    for bus in &a.network().buses {
        let (va, vb) = (a.bus_voltages(bus.id), b.bus_voltages(bus.id));
        for k in 0..3 {
            if let (Some(x), Some(y)) = (va[k], vb[k]) {
                gap = gap.max((x.norm() - y.norm()).abs());
            }
        }
    }
    gap
}
