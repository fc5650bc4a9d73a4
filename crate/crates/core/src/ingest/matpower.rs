//! MATPOWER case reader (bus, gen and branch tables plus `baseMVA`).

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use log::warn;

use super::{read_to_string, IngestError};
use crate::netmodel::{
    Bus, BusId, BusKind, BranchModel, Connection, ElementId, ElementKind, Generator, Load, LoadClass, Network,
    PhaseSet, SeriesElement, Shunt, SlackSource, Zip, C64,
};

/// A parsed transmission case and the warnings raised while reading it.
#[derive(Clone, Debug)]
pub struct MatpowerCase {
    pub network: Network,
    pub warnings: Vec<String>,
}

pub fn parse_transmission(path: &Path) -> Result<Network, IngestError> {
    let text = read_to_string(path)?;
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let mut case = parse_matpower(&text)?;
    for w in &case.warnings {
        warn!("{}: {w}", path.display());
    }
    if case.network.name.is_empty() {
        case.network.name = name;
    }
    Ok(case.network)
}

struct Table {
    line: usize,
    rows: Vec<(usize, Vec<f64>)>,
}

enum Value {
    Scalar(f64),
    Matrix(Table),
    Ignored,
}

fn strip_comment(line: &str) -> &str {
    // '%' inside a quoted string is rare in case files; a plain split is enough.
    match line.find('%') {
        Some(k) => &line[..k],
        None => line,
    }
}

fn parse_number(tok: &str, line: usize) -> Result<f64, IngestError> {
    match tok {
        "Inf" | "inf" => Ok(f64::INFINITY),
        "-Inf" | "-inf" => Ok(f64::NEG_INFINITY),
        _ => tok.parse::<f64>().map_err(|_| IngestError::Syntax {
            line,
            message: format!("expected a number, found {tok:?}"),
        }),
    }
}

fn tokenize(text: &str) -> Result<Vec<(String, Value)>, IngestError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut out = Vec::new();
    let mut k = 0;
    while k < lines.len() {
        let lineno = k + 1;
        let line = strip_comment(lines[k]).trim();
        k += 1;
        if line.is_empty() || line.starts_with("function") {
            continue;
        }
        let Some((lhs, rhs)) = line.split_once('=') else {
            return Err(IngestError::Syntax {
                line: lineno,
                message: format!("expected an assignment, found {line:?}"),
            });
        };
        let name = lhs.trim();
        let name = name.strip_prefix("mpc.").unwrap_or(name).to_string();
        let rhs = rhs.trim();

        if let Some(body) = rhs.strip_prefix('[') {
            let mut table = Table { line: lineno, rows: Vec::new() };
            let mut chunk = body.to_string();
            let mut chunk_line = lineno;
            loop {
                let (content, closed) = match chunk.find(']') {
                    Some(end) => (chunk[..end].to_string(), true),
                    None => (chunk.clone(), false),
                };
                for row in content.split(';') {
                    let cells: Vec<&str> = row
                        .split(|c: char| c.is_whitespace() || c == ',')
                        .filter(|s| !s.is_empty())
                        .collect();
                    if cells.is_empty() {
                        continue;
                    }
                    let values = cells
                        .iter()
                        .map(|c| parse_number(c, chunk_line))
                        .collect::<Result<Vec<_>, _>>()?;
                    table.rows.push((chunk_line, values));
                }
                if closed {
                    break;
                }
                if k >= lines.len() {
                    return Err(IngestError::Syntax {
                        line: lineno,
                        message: format!("matrix {name} is never closed with ']'"),
                    });
                }
                chunk = strip_comment(lines[k]).to_string();
                chunk_line = k + 1;
                k += 1;
            }
            out.push((name, Value::Matrix(table)));
        } else if rhs.starts_with('{') {
            // Cell arrays (bus names and the like) are skipped whole.
            let mut closed = rhs.contains('}');
            while !closed && k < lines.len() {
                closed = strip_comment(lines[k]).contains('}');
                k += 1;
            }
            if !closed {
                return Err(IngestError::Syntax {
                    line: lineno,
                    message: format!("cell array {name} is never closed with '}}'"),
                });
            }
            out.push((name, Value::Ignored));
        } else {
            let value = rhs.trim_end_matches(';').trim();
            if value.starts_with('\'') || value.starts_with('"') {
                out.push((name, Value::Ignored));
            } else {
                out.push((name, Value::Scalar(parse_number(value, lineno)?)));
            }
        }
    }
    Ok(out)
}

fn column(row: &[f64], col: usize, line: usize, table: &str) -> Result<f64, IngestError> {
    row.get(col).copied().ok_or_else(|| IngestError::Syntax {
        line,
        message: format!("{table} row has {} columns, need at least {}", row.len(), col + 1),
    })
}

/// Parse MATPOWER case text into a per-unit network on the case's MVA base.
pub fn parse_matpower(text: &str) -> Result<MatpowerCase, IngestError> {
    let mut warnings = Vec::new();
    let mut base_mva = None;
    let mut tables: HashMap<String, Table> = HashMap::new();
    for (name, value) in tokenize(text)? {
        match (name.as_str(), value) {
            ("baseMVA", Value::Scalar(v)) => base_mva = Some(v),
            ("version", _) => {}
            ("bus" | "gen" | "branch", Value::Matrix(t)) => {
                tables.insert(name, t);
            }
            (other, _) => warnings.push(format!("ignoring unsupported field {other}")),
        }
    }
    let base = base_mva.ok_or_else(|| IngestError::Invalid("case has no baseMVA".into()))?;
    if !(base > 0.0) {
        return Err(IngestError::Invalid(format!("baseMVA must be positive, got {base}")));
    }
    let bus_table = tables.remove("bus").ok_or_else(|| IngestError::Invalid("case has no bus table".into()))?;
    let branch_table = tables
        .remove("branch")
        .ok_or_else(|| IngestError::Invalid("case has no branch table".into()))?;
    let gen_table = tables.remove("gen").unwrap_or(Table { line: 0, rows: Vec::new() });

    struct RawBus {
        line: usize,
        id: BusId,
        kind: u32,
        pd: f64,
        qd: f64,
        gs: f64,
        bs: f64,
        vm: f64,
        va: f64,
        base_kv: f64,
    }
    let mut raw_buses = Vec::new();
    let mut seen = HashMap::new();
    for (line, row) in &bus_table.rows {
        let c = |k| column(row, k, *line, "bus");
        let id = BusId(c(0)? as u64);
        if seen.insert(id, *line).is_some() {
            return Err(IngestError::Syntax {
                line: *line,
                message: format!("bus {id} defined twice"),
            });
        }
        raw_buses.push(RawBus {
            line: *line,
            id,
            kind: c(1)? as u32,
            pd: c(2)?,
            qd: c(3)?,
            gs: c(4)?,
            bs: c(5)?,
            vm: c(7)?,
            va: c(8)?,
            base_kv: c(9)?,
        });
    }
    let _ = bus_table.line;

    // Generators grouped by bus in file order.
    struct RawGen {
        pg: f64,
        qg: f64,
        qmax: f64,
        qmin: f64,
        vg: f64,
    }
    let mut gens: BTreeMap<BusId, Vec<RawGen>> = BTreeMap::new();
    for (line, row) in &gen_table.rows {
        let c = |k| column(row, k, *line, "gen");
        let bus = BusId(c(0)? as u64);
        if !seen.contains_key(&bus) {
            return Err(IngestError::UnknownBus {
                bus,
                context: format!("generator on line {line}"),
            });
        }
        if c(7)? <= 0.0 {
            continue;
        }
        gens.entry(bus).or_default().push(RawGen {
            pg: c(1)?,
            qg: c(2)?,
            qmax: c(3)?,
            qmin: c(4)?,
            vg: c(5)?,
        });
    }

    let mut net = Network {
        s_base_mva: base,
        ..Default::default()
    };
    let mut isolated = Vec::new();
    for rb in &raw_buses {
        let kind = match rb.kind {
            1 => BusKind::Pq,
            2 => {
                if gens.contains_key(&rb.id) {
                    BusKind::Pv
                } else {
                    warnings.push(format!("bus {} is PV but has no in-service generator; treating as PQ", rb.id));
                    BusKind::Pq
                }
            }
            3 => BusKind::Slack,
            4 => {
                warnings.push(format!("bus {} is isolated and was dropped", rb.id));
                isolated.push(rb.id);
                continue;
            }
            other => {
                return Err(IngestError::Syntax {
                    line: rb.line,
                    message: format!("bus {} has unknown type {other}", rb.id),
                })
            }
        };
        let angle = rb.va.to_radians();
        let flat = rb.vm == 1.0 && rb.va == 0.0;
        net.buses.push(Bus {
            id: rb.id,
            name: rb.id.to_string(),
            kind,
            phases: PhaseSet::POSITIVE,
            base_kv: if rb.base_kv > 0.0 { rb.base_kv } else { 1.0 },
            v_init: if flat {
                None
            } else {
                let v = C64::from_polar(rb.vm, angle);
                Some([v, C64::new(0.0, 0.0), C64::new(0.0, 0.0)])
            },
        });
        if rb.pd != 0.0 || rb.qd != 0.0 {
            net.loads.push(Load {
                bus: rb.id,
                connection: Connection::Wye,
                power: [C64::new(rb.pd, rb.qd) / base, C64::new(0.0, 0.0), C64::new(0.0, 0.0)],
                zip: Zip::CONSTANT_POWER,
                class: LoadClass::Demand,
            });
        }
        if rb.gs != 0.0 || rb.bs != 0.0 {
            net.shunts.push(Shunt {
                bus: rb.id,
                y: [C64::new(rb.gs, rb.bs) / base, C64::new(0.0, 0.0), C64::new(0.0, 0.0)],
            });
        }
        let group = gens.get(&rb.id);
        match (kind, group) {
            (BusKind::Slack, group) => {
                let vm = group.map(|g| g[0].vg).unwrap_or(rb.vm);
                net.slacks.push(SlackSource {
                    bus: rb.id,
                    voltage: C64::from_polar(vm, angle),
                });
            }
            (BusKind::Pv, Some(group)) => {
                net.generators.push(Generator {
                    bus: rb.id,
                    p: group.iter().map(|g| g.pg).sum::<f64>() / base,
                    v_set: group[0].vg,
                    q_min: group.iter().map(|g| g.qmin).sum::<f64>() / base,
                    q_max: group.iter().map(|g| g.qmax).sum::<f64>() / base,
                    in_service: true,
                    q_init: group.iter().map(|g| g.qg).sum::<f64>() / base,
                });
            }
            (BusKind::Pq, Some(group)) => {
                let s: C64 = group.iter().map(|g| C64::new(g.pg, g.qg)).sum();
                net.loads.push(Load {
                    bus: rb.id,
                    connection: Connection::Wye,
                    power: [-s / base, C64::new(0.0, 0.0), C64::new(0.0, 0.0)],
                    zip: Zip::CONSTANT_POWER,
                    class: LoadClass::Generation,
                });
            }
            _ => {}
        }
    }

    for (k, (line, row)) in branch_table.rows.iter().enumerate() {
        let c = |col| column(row, col, *line, "branch");
        let from = BusId(c(0)? as u64);
        let to = BusId(c(1)? as u64);
        for end in [from, to] {
            if !seen.contains_key(&end) {
                return Err(IngestError::UnknownBus {
                    bus: end,
                    context: format!("branch on line {line}"),
                });
            }
        }
        if c(10)? == 0.0 {
            continue;
        }
        if isolated.contains(&from) || isolated.contains(&to) {
            warnings.push(format!("branch {from}-{to} on line {line} touches an isolated bus and was dropped"));
            continue;
        }
        let (r, x, b) = (c(2)?, c(3)?, c(4)?);
        if r == 0.0 && x == 0.0 {
            return Err(IngestError::ZeroImpedance { line: *line, from, to });
        }
        let ratio = c(8)?;
        let shift = c(9)?;
        let is_xfmr = ratio != 0.0 || shift != 0.0;
        net.elements.push(SeriesElement {
            id: ElementId(k as u64 + 1),
            from,
            to,
            kind: if is_xfmr { ElementKind::Transformer } else { ElementKind::Line },
            model: BranchModel::Positive {
                y_series: 1.0 / C64::new(r, x),
                b_charging: b,
                tap: if ratio == 0.0 { 1.0 } else { ratio },
                shift: shift.to_radians(),
            },
        });
    }

    Ok(MatpowerCase { network: net, warnings })
}
