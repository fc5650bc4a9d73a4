//! `bench`: wall time against the number of attached feeders.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

use log::{info, warn};
use serde::{Deserialize, Serialize};
use tdflow::circuit::Circuit;
use tdflow::ingest::{build_combined, CombineOptions, CouplingMap, CouplingPair};
use tdflow::netmodel::{BusKind, Network};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::inputs::{load_feeder, load_transmission};
use crate::output::{ensure_dir, write_json, SCHEMA};
use crate::solve::{run_solver, RunReport};

pub const CSV_SCHEMA_LINE: &str = "# schema: 1";
pub const CSV_HEADER: [&str; 6] = ["k", "unknowns", "wall_seconds", "epochs", "mean_inner_iterations", "status"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub k: usize,
    pub unknowns: usize,
    pub wall_seconds: f64,
    pub epochs: usize,
    pub mean_inner_iterations: f64,
    /// `ok`, or the failure message.
    pub status: String,
}

impl BenchRow {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema: u32,
    pub solver: String,
    pub feeder: String,
    pub rows: Vec<BenchRow>,
    /// Slope of ln(wall time) against ln(k) over the successful rows.
    pub exponent: Option<f64>,
}

/// Least-squares slope of `ln y` on `ln x`; needs two distinct positive `x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.0 > 0.0 && p.1 > 0.0)
        .map(|p| (p.0.ln(), p.1.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (pts.len() >= 2 && sxx > 1e-12).then(|| sxy / sxx)
}

/// The transmission case with `feeder` attached at its first `k` PQ buses.
pub fn replicate(transmission: &Network, feeder_name: &str, feeder: &tdflow::ingest::FeederFile, k: usize) -> Result<Network, CliError> {
    let pq: Vec<u64> = transmission.buses.iter().filter(|b| b.kind == BusKind::Pq).map(|b| b.id.0).collect();
    if pq.len() < k {
        return Err(CliError::input(format!("the case has {} PQ buses, fewer than k = {k}", pq.len())));
    }
    let map = CouplingMap {
        schema: 1,
        pairs: pq[..k]
            .iter()
            .map(|&bus| CouplingPair {
                feeder: feeder_name.to_string(),
                bus,
                load_scale: 1.0,
                der_scale: 1.0,
            })
            .collect(),
    };
    let files = BTreeMap::from([(feeder_name.to_string(), feeder.clone())]);
    Ok(build_combined(transmission, &map, &files, &CombineOptions::default())?)
}

fn bench_point(net: &Network, cfg: &RunConfig, repeat: usize) -> Result<(f64, usize, f64), CliError> {
    let mut best: Option<(f64, usize, f64)> = None;
    for _ in 0..repeat {
        let s = run_solver(net, &cfg.solver)?;
        let (epochs, inner) = match &s.report {
            RunReport::Direct(r) => (1, r.iterations as f64),
            RunReport::Gsn(r) => (r.epochs, r.mean_inner_iterations()),
        };
        if best.is_none_or(|b| s.seconds < b.0) {
            best = Some((s.seconds, epochs, inner));
        }
    }
    Ok(best.expect("repeat is at least 1"))
}

pub fn cmd_bench(cfg: &RunConfig) -> Result<BenchReport, CliError> {
    let bench = cfg.bench.as_ref().expect("bench has counts");
    let case = cfg.inputs.case.as_ref().expect("bench has a case");
    let feeder_path = cfg.inputs.feeder.as_ref().expect("bench has a feeder");
    let transmission = load_transmission(case)?;
    let feeder = load_feeder(feeder_path)?;
    let name = feeder_path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    ensure_dir(&cfg.out)?;

    let mut rows = Vec::new();
    for &k in &bench.ks {
        let mut row = BenchRow {
            k,
            unknowns: 0,
            wall_seconds: f64::NAN,
            epochs: 0,
            mean_inner_iterations: f64::NAN,
            status: "ok".into(),
        };
        let outcome = replicate(&transmission, &name, &feeder, k).and_then(|net| {
            row.unknowns = Circuit::new(net.clone()).map_err(|e| CliError::internal(e.to_string()))?.dim();
            bench_point(&net, cfg, bench.repeat)
        });
        match outcome {
            Ok((t, epochs, inner)) => {
                info!("k = {k}: {} unknowns, {t:.3} s, {epochs} epochs", row.unknowns);
                row.wall_seconds = t;
                row.epochs = epochs;
                row.mean_inner_iterations = inner;
            }
            Err(e) => {
                warn!("k = {k} failed: {e}");
                row.status = e.to_string();
            }
        }
        rows.push(row);
    }
    let fit: Vec<(f64, f64)> = rows.iter().filter(|r| r.ok()).map(|r| (r.k as f64, r.wall_seconds)).collect();
    let report = BenchReport {
        schema: SCHEMA,
        solver: format!("{:?}", cfg.solver.kind).to_lowercase(),
        feeder: name,
        exponent: loglog_slope(&fit),
        rows,
    };
    write_csv(&cfg.out.join("bench.csv"), &report)?;
    write_json(&cfg.out.join("bench.json"), &report)?;
    Ok(report)
}

fn write_csv(path: &Path, report: &BenchReport) -> Result<(), CliError> {
    let mut file = std::fs::File::create(path)?;
    writeln!(file, "{CSV_SCHEMA_LINE}")?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(CSV_HEADER)?;
    for r in &report.rows {
        let num = |v: f64, digits: usize| if v.is_finite() { format!("{v:.digits$}") } else { String::new() };
        w.write_record([
            r.k.to_string(),
            r.unknowns.to_string(),
            num(r.wall_seconds, 6),
            r.epochs.to_string(),
            num(r.mean_inner_iterations, 3),
            r.status.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
