//! Three-phase feeder documents (JSON, `"schema": 1`).
//!
//! Physical units on disk: kV line-to-line, ohms, kW and kVAr. In memory the
//! feeder is per-unit on the transmission MVA base with a line-to-neutral
//! voltage base, so per-phase powers are on one third of the three-phase base.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{read_to_string, IngestError};
use crate::netmodel::{
    BranchModel, Bus, BusId, BusKind, Connection, ElementId, ElementKind, Load, LoadClass, Network, Phase,
    PhaseMatrix, PhaseSet, SeriesElement, Shunt, Winding, Zip, C64,
};

pub const FEEDER_SCHEMA: u64 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeederFile {
    pub schema: u64,
    pub name: String,
    pub head: u64,
    pub nodes: Vec<NodeRecord>,
    #[serde(default)]
    pub lines: Vec<LineRecord>,
    #[serde(default)]
    pub transformers: Vec<TransformerRecord>,
    #[serde(default)]
    pub loads: Vec<LoadRecord>,
    #[serde(default)]
    pub capacitors: Vec<CapacitorRecord>,
    #[serde(default)]
    pub ders: Vec<DerRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: u64,
    pub phases: PhaseSet,
    /// Nominal line-to-line voltage.
    pub kv: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineRecord {
    pub from: u64,
    pub to: u64,
    pub phases: PhaseSet,
    /// Series impedance per unit length over `phases`, as `[re, im]` pairs.
    pub z: Vec<Vec<C64>>,
    pub length: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransformerConnection {
    WyeWye,
    DeltaWye,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformerRecord {
    pub from: u64,
    pub to: u64,
    pub connection: TransformerConnection,
    /// Per-phase leakage impedance in ohms, referred to the `to` side.
    pub z: C64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadRecord {
    pub node: u64,
    pub connection: Connection,
    /// Per phase for wye, per leg (ab, bc, ca) for delta.
    pub kw: [f64; 3],
    pub kvar: [f64; 3],
    #[serde(default)]
    pub zip: Zip,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacitorRecord {
    pub node: u64,
    pub kvar: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerRecord {
    pub node: u64,
    pub kw: [f64; 3],
    pub kvar: [f64; 3],
    pub group: String,
}

/// A feeder converted to per-unit.
#[derive(Clone, Debug, PartialEq)]
pub struct Feeder {
    pub name: String,
    pub head: BusId,
    pub network: Network,
}

pub fn parse_feeder(path: &Path, s_base_mva: f64) -> Result<Feeder, IngestError> {
    let file: FeederFile = serde_json::from_str(&read_to_string(path)?)?;
    feeder_to_network(&file, s_base_mva)
}

/// Per-phase power base in kVA.
fn phase_kva(s_base_mva: f64) -> f64 {
    s_base_mva * 1000.0 / 3.0
}

/// Impedance base in ohms for a line-to-line kV rating.
fn z_base(kv: f64, s_base_mva: f64) -> f64 {
    kv * kv / s_base_mva
}

fn symmetric(z: &DMatrix<C64>) -> bool {
    let scale = z.iter().map(|v| v.norm()).fold(0.0, f64::max);
    (0..z.nrows()).all(|i| (0..z.ncols()).all(|j| (z[(i, j)] - z[(j, i)]).norm() <= 1e-12 * scale))
}

pub fn feeder_to_network(file: &FeederFile, s_base_mva: f64) -> Result<Feeder, IngestError> {
    if file.schema != FEEDER_SCHEMA {
        return Err(IngestError::Schema {
            found: file.schema,
            expected: FEEDER_SCHEMA,
        });
    }
    if !(s_base_mva > 0.0) {
        return Err(IngestError::Invalid(format!("MVA base must be positive, got {s_base_mva}")));
    }
    let kva = phase_kva(s_base_mva);

    let mut nodes: HashMap<u64, &NodeRecord> = HashMap::new();
    for n in &file.nodes {
        if nodes.insert(n.id, n).is_some() {
            return Err(IngestError::Invalid(format!("feeder {}: node {} defined twice", file.name, n.id)));
        }
        if !n.phases.is_three_phase() {
            return Err(IngestError::PhaseMismatch {
                element: format!("node {}", n.id),
                message: format!("phases must be a non-empty subset of abc, got {:?}", n.phases.to_string()),
            });
        }
        if !(n.kv > 0.0) {
            return Err(IngestError::Invalid(format!("node {}: kV must be positive", n.id)));
        }
    }
    let node = |id: u64, context: &str| {
        nodes.get(&id).copied().ok_or_else(|| IngestError::UnknownBus {
            bus: BusId(id),
            context: context.to_string(),
        })
    };
    let head = node(file.head, "feeder head")?;
    if head.phases != PhaseSet::ABC {
        return Err(IngestError::PhaseMismatch {
            element: format!("head node {}", head.id),
            message: "feeder head must carry phases abc".into(),
        });
    }

    let loaded: HashSet<u64> = file.loads.iter().map(|l| l.node).chain(file.ders.iter().map(|d| d.node)).collect();
    let mut net = Network {
        name: file.name.clone(),
        s_base_mva,
        ..Default::default()
    };
    for n in &file.nodes {
        let kind = if n.id == file.head {
            BusKind::FeederHead
        } else if loaded.contains(&n.id) {
            BusKind::LoadNode
        } else {
            BusKind::InternalNode
        };
        net.buses.push(Bus {
            id: BusId(n.id),
            name: n.id.to_string(),
            kind,
            phases: n.phases,
            base_kv: n.kv,
            v_init: None,
        });
    }

    let mut next_id = 1;
    for (k, line) in file.lines.iter().enumerate() {
        let label = format!("line {} ({}-{})", k + 1, line.from, line.to);
        let from = node(line.from, &label)?;
        let to = node(line.to, &label)?;
        if !line.phases.is_three_phase() {
            return Err(IngestError::PhaseMismatch {
                element: label,
                message: "line phases must be a non-empty subset of abc".into(),
            });
        }
        if !line.phases.is_subset_of(from.phases) || !line.phases.is_subset_of(to.phases) {
            return Err(IngestError::PhaseMismatch {
                element: label,
                message: format!(
                    "phases {} not present at both ends ({} / {})",
                    line.phases, from.phases, to.phases
                ),
            });
        }
        let m = line.phases.len();
        if line.z.len() != m || line.z.iter().any(|r| r.len() != m) {
            return Err(IngestError::PhaseMismatch {
                element: label,
                message: format!("impedance must be {m}x{m} for phases {}", line.phases),
            });
        }
        if !(line.length > 0.0) {
            return Err(IngestError::Invalid(format!("{label}: length must be positive")));
        }
        let z = DMatrix::from_fn(m, m, |i, j| line.z[i][j] * line.length / z_base(from.kv, s_base_mva));
        if !symmetric(&z) {
            return Err(IngestError::AsymmetricImpedance { element: label });
        }
        let y = z.try_inverse().ok_or_else(|| IngestError::SingularImpedance { element: label.clone() })?;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(IngestError::SingularImpedance { element: label });
        }
        let phases: Vec<Phase> = line.phases.iter().collect();
        let mut block = PhaseMatrix::zero();
        for (i, pi) in phases.iter().enumerate() {
            for (j, pj) in phases.iter().enumerate() {
                block.0[pi.slot()][pj.slot()] = 0.5 * (y[(i, j)] + y[(j, i)]);
            }
        }
        net.elements.push(SeriesElement {
            id: ElementId(next_id),
            from: BusId(line.from),
            to: BusId(line.to),
            kind: ElementKind::Line,
            model: BranchModel::ThreePhase {
                phases: line.phases,
                y: block,
                winding: Winding::Series,
            },
        });
        next_id += 1;
    }

    for (k, t) in file.transformers.iter().enumerate() {
        let label = format!("transformer {} ({}-{})", k + 1, t.from, t.to);
        let from = node(t.from, &label)?;
        let to = node(t.to, &label)?;
        if from.phases != PhaseSet::ABC || to.phases != PhaseSet::ABC {
            return Err(IngestError::PhaseMismatch {
                element: label,
                message: "transformers must connect three-phase (abc) nodes".into(),
            });
        }
        let z = t.z / z_base(to.kv, s_base_mva);
        if !(z.norm() > 0.0) {
            return Err(IngestError::SingularImpedance { element: label });
        }
        let y = 1.0 / z;
        net.elements.push(SeriesElement {
            id: ElementId(next_id),
            from: BusId(t.from),
            to: BusId(t.to),
            kind: ElementKind::Transformer,
            model: BranchModel::ThreePhase {
                phases: PhaseSet::ABC,
                y: PhaseMatrix::diagonal([y; 3]),
                winding: match t.connection {
                    TransformerConnection::WyeWye => Winding::Series,
                    TransformerConnection::DeltaWye => Winding::DeltaWye,
                },
            },
        });
        next_id += 1;
    }

    let per_phase = |kw: [f64; 3], kvar: [f64; 3]| -> [C64; 3] {
        std::array::from_fn(|k| C64::new(kw[k], kvar[k]) / kva)
    };
    let check_phases = |n: &NodeRecord, values: [f64; 3], label: &str| -> Result<(), IngestError> {
        for p in Phase::ABC {
            if values[p.slot()] != 0.0 && !n.phases.contains(p) {
                return Err(IngestError::PhaseMismatch {
                    element: label.to_string(),
                    message: format!("phase {p} has power but node {} lacks it", n.id),
                });
            }
        }
        Ok(())
    };
    for (k, l) in file.loads.iter().enumerate() {
        let label = format!("load {} at node {}", k + 1, l.node);
        let n = node(l.node, &label)?;
        match l.connection {
            Connection::Wye => {
                let mag: [f64; 3] = std::array::from_fn(|i| l.kw[i].abs() + l.kvar[i].abs());
                check_phases(n, mag, &label)?;
            }
            Connection::Delta => {
                if n.phases != PhaseSet::ABC {
                    return Err(IngestError::PhaseMismatch {
                        element: label,
                        message: format!("delta connection needs phases abc, node {} has {}", n.id, n.phases),
                    });
                }
            }
        }
        if !l.zip.is_valid() {
            return Err(IngestError::Invalid(format!("{label}: ZIP shares must lie in [0,1] and sum to 1")));
        }
        net.loads.push(Load {
            bus: BusId(l.node),
            connection: l.connection,
            power: per_phase(l.kw, l.kvar),
            zip: l.zip,
            class: LoadClass::Demand,
        });
    }
    for (k, c) in file.capacitors.iter().enumerate() {
        let label = format!("capacitor {} at node {}", k + 1, c.node);
        let n = node(c.node, &label)?;
        check_phases(n, c.kvar, &label)?;
        net.shunts.push(Shunt {
            bus: BusId(c.node),
            y: std::array::from_fn(|i| C64::new(0.0, c.kvar[i] / kva)),
        });
    }
    for (k, d) in file.ders.iter().enumerate() {
        let label = format!("DER {} at node {}", k + 1, d.node);
        let n = node(d.node, &label)?;
        let mag: [f64; 3] = std::array::from_fn(|i| d.kw[i].abs() + d.kvar[i].abs());
        check_phases(n, mag, &label)?;
        net.loads.push(Load {
            bus: BusId(d.node),
            connection: Connection::Wye,
            power: per_phase(d.kw, d.kvar).map(|s| -s),
            zip: Zip::CONSTANT_POWER,
            class: LoadClass::Der { group: d.group.clone() },
        });
    }

    Ok(Feeder {
        name: file.name.clone(),
        head: BusId(file.head),
        network: net,
    })
}

/// Convert a per-unit feeder back to physical units.
///
/// Lines come back with unit length and their total impedance.
pub fn network_to_feeder(feeder: &Feeder) -> FeederFile {
    let net = &feeder.network;
    let s_base = net.s_base_mva;
    let kva = phase_kva(s_base);
    let kv_of = |id: BusId| net.bus(id).map(|b| b.base_kv).unwrap_or(1.0);

    let mut file = FeederFile {
        schema: FEEDER_SCHEMA,
        name: feeder.name.clone(),
        head: feeder.head.0,
        nodes: net
            .buses
            .iter()
            .map(|b| NodeRecord {
                id: b.id.0,
                phases: b.phases,
                kv: b.base_kv,
            })
            .collect(),
        lines: Vec::new(),
        transformers: Vec::new(),
        loads: Vec::new(),
        capacitors: Vec::new(),
        ders: Vec::new(),
    };

    for e in &net.elements {
        let BranchModel::ThreePhase { phases, y, winding } = &e.model else { continue };
        match e.kind {
            ElementKind::Line => {
                let ps: Vec<Phase> = phases.iter().collect();
                let m = ps.len();
                let ym = DMatrix::from_fn(m, m, |i, j| y.get(ps[i], ps[j]));
                let zb = z_base(kv_of(e.from), s_base);
                let z = ym.try_inverse().unwrap_or_else(|| DMatrix::zeros(m, m)) * C64::new(zb, 0.0);
                file.lines.push(LineRecord {
                    from: e.from.0,
                    to: e.to.0,
                    phases: *phases,
                    z: (0..m).map(|i| (0..m).map(|j| 0.5 * (z[(i, j)] + z[(j, i)])).collect()).collect(),
                    length: 1.0,
                });
            }
            ElementKind::Transformer => {
                file.transformers.push(TransformerRecord {
                    from: e.from.0,
                    to: e.to.0,
                    connection: match winding {
                        Winding::Series => TransformerConnection::WyeWye,
                        Winding::DeltaWye => TransformerConnection::DeltaWye,
                    },
                    z: z_base(kv_of(e.to), s_base) / y.0[0][0],
                });
            }
        }
    }

    for l in &net.loads {
        let kw = l.power.map(|s| s.re * kva);
        let kvar = l.power.map(|s| s.im * kva);
        match &l.class {
            LoadClass::Der { group } => file.ders.push(DerRecord {
                node: l.bus.0,
                kw: kw.map(|v| -v),
                kvar: kvar.map(|v| -v),
                group: group.clone(),
            }),
            _ => file.loads.push(LoadRecord {
                node: l.bus.0,
                connection: l.connection,
                kw,
                kvar,
                zip: l.zip,
            }),
        }
    }
    for s in &net.shunts {
        file.capacitors.push(CapacitorRecord {
            node: s.bus.0,
            kvar: s.y.map(|y| y.im * kva),
        });
    }
    file
}
