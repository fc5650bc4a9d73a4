use std::collections::HashMap;

use super::types::{BusId, BusKind, Network};

/// A connected group of three-phase buses, normally one feeder.
#[derive(Clone, Debug, PartialEq)]
pub struct FeederRegion {
    pub head: Option<BusId>,
    /// Buses in network order.
    pub buses: Vec<BusId>,
    /// The head is pinned by a coupling port or a head source.
    pub driven: bool,
    pub port: Option<usize>,
    pub source: Option<usize>,
    /// Every `FeederHead` bus found in the region (validation wants exactly one).
    pub heads_found: Vec<BusId>,
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Smaller root wins so labels do not depend on union order.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Group three-phase buses into regions connected by series elements.
///
/// Regions are ordered by coupling-port order, then head-source order,
/// then by first bus for anything left over.
pub fn feeder_regions(network: &Network) -> Vec<FeederRegion> {
    let position: HashMap<BusId, usize> = network
        .buses
        .iter()
        .enumerate()
        .map(|(i, b)| (b.id, i))
        .collect();
    let mut uf = UnionFind::new(network.buses.len());
    for e in &network.elements {
        if let (Some(&i), Some(&j)) = (position.get(&e.from), position.get(&e.to)) {
            let both_three_phase = !network.buses[i].is_transmission() && !network.buses[j].is_transmission();
            if both_three_phase {
                uf.union(i, j);
            }
        }
    }

    let mut by_root: Vec<(usize, FeederRegion)> = Vec::new();
    let mut root_slot: HashMap<usize, usize> = HashMap::new();
    for (i, bus) in network.buses.iter().enumerate() {
        if bus.is_transmission() {
            continue;
        }
        let root = uf.find(i);
        let slot = *root_slot.entry(root).or_insert_with(|| {
            by_root.push((
                root,
                FeederRegion {
                    head: None,
                    buses: Vec::new(),
                    driven: false,
                    port: None,
                    source: None,
                    heads_found: Vec::new(),
                },
            ));
            by_root.len() - 1
        });
        let region = &mut by_root[slot].1;
        region.buses.push(bus.id);
        if bus.kind == BusKind::FeederHead {
            region.heads_found.push(bus.id);
            if region.head.is_none() {
                region.head = Some(bus.id);
            }
        }
    }

    let mut rank: Vec<(usize, usize, usize)> = Vec::with_capacity(by_root.len());
    for (slot, (_, region)) in by_root.iter_mut().enumerate() {
        let mut key = (2usize, slot);
        if let Some(head) = region.head {
            if let Some(p) = network.ports.iter().position(|p| p.feeder_head == head) {
                region.port = Some(p);
                region.driven = true;
                key = (0, p);
            } else if let Some(s) = network.head_sources.iter().position(|s| s.bus == head) {
                region.source = Some(s);
                region.driven = true;
                key = (1, s);
            }
        }
        rank.push((key.0, key.1, slot));
    }
    rank.sort();
    let mut slots: Vec<Option<FeederRegion>> = by_root.into_iter().map(|(_, r)| Some(r)).collect();
    rank.into_iter()
        .map(|(_, _, slot)| slots[slot].take().expect("each slot taken once"))
        .collect()
}

/// Number of connected components over all buses, counting ports as edges.
pub fn component_count(network: &Network) -> usize {
    let position: HashMap<BusId, usize> = network
        .buses
        .iter()
        .enumerate()
        .map(|(i, b)| (b.id, i))
        .collect();
    let mut uf = UnionFind::new(network.buses.len());
    let edges = network
        .elements
        .iter()
        .map(|e| (e.from, e.to))
        .chain(network.ports.iter().map(|p| (p.transmission_bus, p.feeder_head)));
    for (a, b) in edges {
        if let (Some(&i), Some(&j)) = (position.get(&a), position.get(&b)) {
            uf.union(i, j);
        }
    }
    let mut roots: Vec<usize> = (0..network.buses.len()).map(|i| uf.find(i)).collect();
    roots.sort_unstable();
    roots.dedup();
    roots.len()
}
