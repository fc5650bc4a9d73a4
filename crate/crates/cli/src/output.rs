//! Solution, report and summary files.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tdflow::gsn::GsnReport;
use tdflow::netmodel::{BusKind, Network, Phase};
use tdflow::nrsolve::Solution;

use crate::error::CliError;

pub const SCHEMA: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseVoltage {
    pub phase: String,
    pub magnitude: f64,
    pub angle_deg: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BusVoltage {
    pub id: u64,
    pub name: String,
    pub kind: String,
    pub phases: Vec<PhaseVoltage>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub schema: u32,
    pub network: String,
    pub solver: String,
    pub buses: Vec<BusVoltage>,
}

fn kind_label(kind: BusKind) -> &'static str {
    match kind {
        BusKind::Slack => "slack",
        BusKind::Pv => "pv",
        BusKind::Pq => "pq",
        BusKind::FeederHead => "feeder_head",
        BusKind::LoadNode => "load",
        BusKind::InternalNode => "internal",
    }
}

/// Present phases of a bus with their voltages; positive-sequence buses report phase `p`.
fn phase_voltages(sol: &Solution, bus: &tdflow::netmodel::Bus) -> Vec<(Phase, tdflow::netmodel::C64)> {
    if bus.phases.is_positive() {
        sol.voltage(bus.id, Phase::P).map(|v| vec![(Phase::P, v)]).unwrap_or_default()
    } else {
        bus.phases.iter().filter_map(|p| sol.voltage(bus.id, p).map(|v| (p, v))).collect()
    }
}

pub fn solution_file(sol: &Solution, solver: &str) -> SolutionFile {
    let net = sol.network();
    SolutionFile {
        schema: SCHEMA,
        network: net.name.clone(),
        solver: solver.to_string(),
        buses: net
            .buses
            .iter()
            .map(|b| BusVoltage {
                id: b.id.0,
                name: b.name.clone(),
                kind: kind_label(b.kind).to_string(),
                phases: phase_voltages(sol, b)
                    .into_iter()
                    .map(|(p, v)| PhaseVoltage {
                        phase: p.label().to_string(),
                        magnitude: v.norm(),
                        angle_deg: v.arg().to_degrees(),
                    })
                    .collect(),
            })
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extreme {
    pub node: u64,
    pub name: String,
    pub phase: String,
    pub voltage: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub network: String,
    pub solver: String,
    pub ports: usize,
    pub mismatch: f64,
    pub poi_max: Option<Extreme>,
    pub poi_min: Option<Extreme>,
    pub node_max: Option<Extreme>,
    pub node_min: Option<Extreme>,
}

fn extremes<'a>(items: impl Iterator<Item = Extreme> + 'a) -> (Option<Extreme>, Option<Extreme>) {
    let mut hi: Option<Extreme> = None;
    let mut lo: Option<Extreme> = None;
    for e in items {
        if hi.as_ref().is_none_or(|h| e.voltage > h.voltage) {
            hi = Some(e.clone());
        }
        if lo.as_ref().is_none_or(|l| e.voltage < l.voltage) {
            lo = Some(e);
        }
    }
    (hi, lo)
}

/// Unique POI buses in port order.
pub fn poi_buses(net: &Network) -> Vec<tdflow::netmodel::BusId> {
    let mut out = Vec::new();
    for p in &net.ports {
        if !out.contains(&p.transmission_bus) {
            out.push(p.transmission_bus);
        }
    }
    out
}

pub fn summarize(sol: &Solution, solver: &str, mismatch: f64) -> Summary {
    let net = sol.network();
    let pois = poi_buses(net);
    let entry = |b: &tdflow::netmodel::Bus, p: Phase, v: tdflow::netmodel::C64| Extreme {
        node: b.id.0,
        name: b.name.clone(),
        phase: p.label().to_string(),
        voltage: v.norm(),
    };
    let (poi_max, poi_min) = extremes(
        net.buses
            .iter()
            .filter(|b| pois.contains(&b.id))
            .flat_map(|b| phase_voltages(sol, b).into_iter().map(move |(p, v)| entry(b, p, v))),
    );
    let (node_max, node_min) =
        extremes(net.buses.iter().flat_map(|b| phase_voltages(sol, b).into_iter().map(move |(p, v)| entry(b, p, v))));
    Summary {
        network: net.name.clone(),
        solver: solver.to_string(),
        ports: net.ports.len(),
        mismatch,
        poi_max,
        poi_min,
        node_max,
        node_min,
    }
}

pub fn summary_text(s: &Summary) -> String {
    let mut t = String::new();
    let _ = writeln!(t, "network   {}", s.network);
    let _ = writeln!(t, "solver    {}", s.solver);
    let _ = writeln!(t, "ports     {}", s.ports);
    let _ = writeln!(t, "mismatch  {:.3e}", s.mismatch);
    let _ = writeln!(t);
    let row = |t: &mut String, label: &str, e: &Extreme| {
        let _ = writeln!(t, "{label:<14}{:<12}{:<8.4}{}", e.node, e.voltage, e.phase);
    };
    match (&s.poi_max, &s.poi_min) {
        (Some(hi), Some(lo)) => {
            let _ = writeln!(t, "POI voltages (pu)");
            let _ = writeln!(t, "{:<14}{:<12}{:<8}phase", "", "node", "voltage");
            row(&mut t, "Max. Voltage", hi);
            row(&mut t, "Min. Voltage", lo);
        }
        _ => {
            let _ = writeln!(t, "POI voltages (pu): none, the network has no coupling ports");
        }
    }
    if let (Some(hi), Some(lo)) = (&s.node_max, &s.node_min) {
        let _ = writeln!(t);
        let _ = writeln!(t, "All nodes (pu)");
        let _ = writeln!(t, "{:<14}{:<12}{:<8}phase", "", "node", "voltage");
        row(&mut t, "Max. Voltage", hi);
        row(&mut t, "Min. Voltage", lo);
    }
    t
}

/// Drop wall-clock fields so reports are reproducible run to run.
pub fn strip_timings(report: &GsnReport) -> Value {
    let mut v = serde_json::to_value(report).expect("report serializes");
    if let Some(records) = v.get_mut("records").and_then(Value::as_array_mut) {
        for r in records {
            if let Some(o) = r.as_object_mut() {
                o.remove("seconds");
            }
        }
    }
    v
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::input(format!("cannot create output directory {}: {e}", dir.display())))
}
