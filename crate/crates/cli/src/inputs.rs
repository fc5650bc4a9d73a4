//! Loading transmission cases, coupling maps, feeders and bundles.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use tdflow::ingest::{build_combined, parse_transmission, CombineOptions, CouplingMap, FeederFile};
use tdflow::netmodel::{BusId, ElementId, Network};

use crate::config::{Inputs, Scenario};
use crate::error::CliError;

/// A coupling map with every feeder file read, keyed by the name used in the map.
#[derive(Clone, Debug)]
pub struct ResolvedMap {
    pub path: PathBuf,
    pub map: CouplingMap,
    pub feeders: BTreeMap<String, (PathBuf, FeederFile)>,
}

#[derive(Clone, Debug)]
pub struct LoadedCase {
    pub transmission_path: PathBuf,
    pub transmission: Network,
    pub map: Option<ResolvedMap>,
    pub network: Network,
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))
}

/// MATPOWER `.m` file, or a JSON-serialized network.
pub fn load_transmission(path: &Path) -> Result<Network, CliError> {
    if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&read(path)?).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
    } else {
        Ok(parse_transmission(path)?)
    }
}

pub fn load_feeder(path: &Path) -> Result<FeederFile, CliError> {
    serde_json::from_str(&read(path)?).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

/// Read a coupling map; feeder names resolve relative to the map's directory.
pub fn load_map(path: &Path) -> Result<ResolvedMap, CliError> {
    let map: CouplingMap =
        serde_json::from_str(&read(path)?).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    map.check()?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut feeders = BTreeMap::new();
    for pair in &map.pairs {
        if feeders.contains_key(&pair.feeder) {
            continue;
        }
        let fp = dir.join(&pair.feeder);
        if !fp.exists() {
            return Err(CliError::input(format!(
                "coupling map {} names feeder {} which does not exist",
                path.display(),
                fp.display()
            )));
        }
        feeders.insert(pair.feeder.clone(), (fp.clone(), load_feeder(&fp)?));
    }
    Ok(ResolvedMap {
        path: path.to_path_buf(),
        map,
        feeders,
    })
}

pub fn combine(transmission: &Network, map: &ResolvedMap, keep_bus_load: bool) -> Result<Network, CliError> {
    let files: BTreeMap<String, FeederFile> = map.feeders.iter().map(|(k, (_, f))| (k.clone(), f.clone())).collect();
    Ok(build_combined(transmission, &map.map, &files, &CombineOptions { keep_bus_load })?)
}

pub fn load_case(inputs: &Inputs) -> Result<LoadedCase, CliError> {
    let (case, map) = match &inputs.bundle {
        Some(dir) => {
            let manifest = crate::generate::read_manifest(dir)?;
            crate::generate::verify_manifest(dir, &manifest)?;
            (dir.join(&manifest.transmission.file), Some(dir.join(&manifest.coupling.file)))
        }
        None => (
            inputs.case.clone().ok_or_else(|| CliError::input("no transmission case given"))?,
            inputs.map.clone(),
        ),
    };
    let transmission = load_transmission(&case)?;
    let resolved = map.as_deref().map(load_map).transpose()?;
    let network = match &resolved {
        Some(m) => combine(&transmission, m, inputs.keep_bus_load)?,
        None => transmission.clone(),
    };
    Ok(LoadedCase {
        transmission_path: case,
        transmission,
        map: resolved,
        network,
    })
}

/// Apply loading, DER scaling and outages to a copy of `base`.
pub fn apply_scenario(base: &Network, s: &Scenario) -> Result<Network, CliError> {
    let mut net = base.clone();
    if s.lf != 1.0 {
        net.scale_loading(s.lf, s.feeders_only);
    }
    if s.der_scale != 1.0 {
        net.scale_ders(s.der_scale, None);
    }
    for &id in &s.remove_elements {
        if !net.remove_element(ElementId(id)) {
            return Err(CliError::input(format!("element {id} does not exist")));
        }
    }
    for &bus in &s.outage_gens {
        if !net.outage_generator(BusId(bus)) {
            return Err(CliError::input(format!("no generator at bus {bus}")));
        }
    }
    Ok(net)
}
