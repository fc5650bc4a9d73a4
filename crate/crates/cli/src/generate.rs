//! `generate`: a self-contained combined-case bundle with a checksummed manifest.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tdflow::ingest::{CouplingMap, FeederFile};
use tdflow::netmodel::{BusKind, Network};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::inputs::{combine, load_map, load_transmission};
use crate::output::{ensure_dir, write_json, SCHEMA};

pub const MANIFEST: &str = "manifest.json";
const COUPLING_FILE: &str = "coupling.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Path relative to the bundle directory.
    pub file: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeederEntry {
    pub name: String,
    pub file: String,
    pub sha256: String,
    pub nodes: usize,
    pub load_nodes: usize,
    pub der_nodes: usize,
    /// DER nodes over load nodes.
    pub der_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PortEntry {
    pub bus: u64,
    pub feeder: String,
    pub head: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub ports: usize,
    pub feeders: usize,
    pub transmission_buses: usize,
    pub distribution_buses: usize,
    pub elements: usize,
    pub loads: usize,
    pub ders: usize,
    pub generators: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: u32,
    pub network: String,
    pub transmission: FileEntry,
    pub coupling: FileEntry,
    pub feeders: Vec<FeederEntry>,
    pub ports: Vec<PortEntry>,
    pub counts: Counts,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "input".into())
}

/// DER placement of one feeder file: (nodes, load nodes, DER nodes).
fn placement(f: &FeederFile) -> (usize, usize, usize) {
    let load_nodes: BTreeSet<u64> = f.loads.iter().map(|l| l.node).collect();
    let der_nodes: BTreeSet<u64> = f.ders.iter().map(|d| d.node).collect();
    (f.nodes.len(), load_nodes.len(), der_nodes.len())
}

fn counts(net: &Network, feeders: usize) -> Counts {
    let transmission = net
        .buses
        .iter()
        .filter(|b| matches!(b.kind, BusKind::Slack | BusKind::Pv | BusKind::Pq))
        .count();
    let ders = net
        .loads
        .iter()
        .filter(|l| matches!(l.class, tdflow::netmodel::LoadClass::Der { .. }))
        .count();
    Counts {
        ports: net.ports.len(),
        feeders,
        transmission_buses: transmission,
        distribution_buses: net.buses.len() - transmission,
        elements: net.elements.len(),
        loads: net.loads.len() - ders,
        ders,
        generators: net.generators.len(),
    }
}

pub fn cmd_generate(cfg: &RunConfig) -> Result<Manifest, CliError> {
    let case = cfg.inputs.case.as_ref().expect("generate has a case");
    let map_path = cfg.inputs.map.as_ref().expect("generate has a map");
    let transmission = load_transmission(case)?;
    let resolved = load_map(map_path)?;
    // Fails on every coupling problem before anything is written.
    let network = combine(&transmission, &resolved, cfg.inputs.keep_bus_load)?;

    ensure_dir(&cfg.out)?;
    ensure_dir(&cfg.out.join("feeders"))?;
    let case_bytes = std::fs::read(case)?;
    let case_file = file_name(case);
    std::fs::write(cfg.out.join(&case_file), &case_bytes)?;

    // Copy each distinct feeder once; clashing file names get an index prefix.
    let mut renamed: BTreeMap<String, String> = BTreeMap::new();
    let mut used = BTreeSet::new();
    let mut feeders = Vec::new();
    for (k, (name, (path, file))) in resolved.feeders.iter().enumerate() {
        let mut base = file_name(path);
        if !used.insert(base.clone()) {
            base = format!("{k}_{base}");
            used.insert(base.clone());
        }
        let rel = format!("feeders/{base}");
        let bytes = std::fs::read(path)?;
        std::fs::write(cfg.out.join(&rel), &bytes)?;
        let (nodes, load_nodes, der_nodes) = placement(file);
        feeders.push(FeederEntry {
            name: file.name.clone(),
            file: rel.clone(),
            sha256: sha256_hex(&bytes),
            nodes,
            load_nodes,
            der_nodes,
            der_fraction: if load_nodes == 0 { 0.0 } else { der_nodes as f64 / load_nodes as f64 },
        });
        renamed.insert(name.clone(), rel);
    }

    let mut map: CouplingMap = resolved.map.clone();
    for pair in &mut map.pairs {
        pair.feeder = renamed[&pair.feeder].clone();
    }
    let coupling_path = cfg.out.join(COUPLING_FILE);
    write_json(&coupling_path, &map)?;
    let coupling_bytes = std::fs::read(&coupling_path)?;

    let ports = map
        .pairs
        .iter()
        .zip(&network.ports)
        .map(|(pair, port)| PortEntry {
            bus: pair.bus,
            feeder: pair.feeder.clone(),
            head: port.feeder_head.0,
        })
        .collect();
    let manifest = Manifest {
        schema: SCHEMA,
        network: network.name.clone(),
        transmission: FileEntry {
            file: case_file,
            sha256: sha256_hex(&case_bytes),
        },
        coupling: FileEntry {
            file: COUPLING_FILE.into(),
            sha256: sha256_hex(&coupling_bytes),
        },
        counts: counts(&network, feeders.len()),
        feeders,
        ports,
    };
    write_json(&cfg.out.join(MANIFEST), &manifest)?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, CliError> {
    let path = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    let m: Manifest =
        serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    if m.schema != SCHEMA {
        return Err(CliError::input(format!(
            "{} has schema {}, expected {SCHEMA}",
            path.display(),
            m.schema
        )));
    }
    Ok(m)
}

/// Every file listed in the manifest exists and hashes to its recorded checksum.
pub fn verify_manifest(dir: &Path, m: &Manifest) -> Result<(), CliError> {
    let entries = [(&m.transmission.file, &m.transmission.sha256), (&m.coupling.file, &m.coupling.sha256)]
        .into_iter()
        .chain(m.feeders.iter().map(|f| (&f.file, &f.sha256)));
    for (file, sum) in entries {
        let path: PathBuf = dir.join(file);
        let bytes =
            std::fs::read(&path).map_err(|e| CliError::input(format!("bundle file {}: {e}", path.display())))?;
        if sha256_hex(&bytes) != *sum {
            return Err(CliError::input(format!("bundle file {} does not match its checksum", path.display())));
        }
    }
    Ok(())
}
