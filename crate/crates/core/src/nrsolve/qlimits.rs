//! Reactive-limit enforcement for PV buses.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Controls};
use crate::netmodel::{BusId, BusKind, Phase};

/// Slack on limit and setpoint comparisons so rounding cannot cause a switch.
const SWITCH_MARGIN: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchKind {
    ToPqAtMax,
    ToPqAtMin,
    BackToPv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QSwitch {
    pub bus: BusId,
    pub kind: SwitchKind,
    /// Reactive output at the time of the switch.
    pub q: f64,
    pub v_mag: f64,
}

/// Per-bus switch counts; a bus past the limit is frozen where it is.
#[derive(Clone, Debug, Default)]
pub struct QLimitGuard {
    max_switches: usize,
    counts: BTreeMap<BusId, usize>,
    frozen: BTreeMap<BusId, bool>,
}

impl QLimitGuard {
    pub fn new(max_switches: usize) -> Self {
        QLimitGuard {
            max_switches,
            ..Default::default()
        }
    }

    pub fn is_frozen(&self, bus: BusId) -> bool {
        self.frozen.get(&bus).copied().unwrap_or(false)
    }

    pub fn frozen_buses(&self) -> impl Iterator<Item = BusId> + '_ {
        self.frozen.iter().filter(|(_, f)| **f).map(|(b, _)| *b)
    }
}

/// Check every PV bus of a converged state against its reactive limits and
/// update `controls`. Returns the switches made; empty means the controls
/// are settled.
pub fn enforce_q_limits(
    circuit: &Circuit,
    x: &[f64],
    controls: &mut Controls,
    guard: &mut QLimitGuard,
    warnings: &mut Vec<String>,
) -> Vec<QSwitch> {
    let net = circuit.network();
    let mut switches = Vec::new();
    for bus in net.buses.iter().filter(|b| b.kind == BusKind::Pv) {
        if guard.is_frozen(bus.id) {
            continue;
        }
        let Some(gen) = net.regulating_generator(bus.id) else {
            continue;
        };
        let (Some(q), Some(v)) = (circuit.generator_q(x, bus.id), circuit.voltage(x, bus.id, Phase::P)) else {
            continue;
        };
        let v_mag = v.norm();
        let switch = match controls.fixed_q.get(&bus.id) {
            None if q > gen.q_max + SWITCH_MARGIN => Some((SwitchKind::ToPqAtMax, Some(gen.q_max))),
            None if q < gen.q_min - SWITCH_MARGIN => Some((SwitchKind::ToPqAtMin, Some(gen.q_min))),
            None => None,
            Some(&held) => {
                let at_max = held >= gen.q_max;
                let recovered = if at_max {
                    v_mag > gen.v_set + SWITCH_MARGIN
                } else {
                    v_mag < gen.v_set - SWITCH_MARGIN
                };
                recovered.then_some((SwitchKind::BackToPv, None))
            }
        };
        let Some((kind, fixed)) = switch else { continue };
        let count = guard.counts.entry(bus.id).or_insert(0);
        *count += 1;
        if *count > guard.max_switches {
            guard.frozen.insert(bus.id, true);
            warnings.push(format!(
                "PV bus {} switched more than {} times; frozen at its current control state",
                bus.id, guard.max_switches
            ));
            if let std::collections::btree_map::Entry::Vacant(e) = controls.fixed_q.entry(bus.id) {
                e.insert(if q > gen.q_max { gen.q_max } else { gen.q_min });
                switches.push(QSwitch {
                    bus: bus.id,
                    kind: if q > gen.q_max {
                        SwitchKind::ToPqAtMax
                    } else {
                        SwitchKind::ToPqAtMin
                    },
                    q,
                    v_mag,
                });
            }
            continue;
        }
        match fixed {
            Some(limit) => {
                controls.fixed_q.insert(bus.id, limit);
            }
            None => {
                controls.fixed_q.remove(&bus.id);
            }
        }
        switches.push(QSwitch {
            bus: bus.id,
            kind,
            q,
            v_mag,
        });
    }
    switches
}
