//! `pvcurve`: POI voltage against loading factor, one column per scenario.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use log::{info, warn};
use serde::{Deserialize, Serialize};
use tdflow::netmodel::{Bus, BusId, Network, Phase, C64};

use crate::config::{RunConfig, Scenario, Sweep};
use crate::error::CliError;
use crate::inputs::{apply_scenario, load_case};
use crate::output::{ensure_dir, poi_buses, write_json, SCHEMA};
use crate::solve::run_solver;

pub const CSV_SCHEMA_LINE: &str = "# schema: 1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub name: String,
    pub der_scale: f64,
    /// `(lf, |V_POI|)` in sweep order.
    pub points: Vec<(f64, f64)>,
    /// First loading factor that failed, if the sweep stopped early.
    pub stopped_at: Option<f64>,
    pub reason: Option<String>,
}

impl Curve {
    pub fn max_lf(&self) -> Option<f64> {
        self.points.last().map(|p| p.0)
    }

    pub fn at(&self, lf: f64) -> Option<f64> {
        self.points.iter().find(|p| p.0 == lf).map(|p| p.1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PvCurves {
    pub schema: u32,
    pub poi: u64,
    pub loading_factors: Vec<f64>,
    pub curves: Vec<Curve>,
}

fn scenarios(cfg: &RunConfig, sweep: &Sweep) -> Vec<(String, Scenario)> {
    let base = cfg.scenario.clone();
    let mut out = vec![("base".to_string(), base.clone())];
    if !sweep.contingency_elements.is_empty() || !sweep.contingency_gens.is_empty() {
        out.push((
            "contingency".to_string(),
            Scenario {
                remove_elements: sweep.contingency_elements.clone(),
                outage_gens: sweep.contingency_gens.clone(),
                ..base.clone()
            },
        ));
    }
    for &d in &sweep.der_scenarios {
        out.push((
            format!("der_x{d}"),
            Scenario {
                der_scale: d,
                ..base.clone()
            },
        ));
    }
    out
}

/// Seed every bus with the voltages of a previous point.
fn warm_start(net: &mut Network, previous: &tdflow::nrsolve::Solution) {
    for bus in &mut net.buses {
        let v = previous.bus_voltages(bus.id);
        if v.iter().all(Option::is_none) {
            continue;
        }
        let mut init = [C64::new(0.0, 0.0); 3];
        for (k, p) in Phase::ABC.into_iter().enumerate() {
            init[k] = v[k].unwrap_or_else(|| Bus::flat_voltage(p));
        }
        bus.v_init = Some(init);
    }
}

fn sweep_one(base: &Network, name: &str, scenario: &Scenario, lfs: &[f64], poi: BusId, cfg: &RunConfig) -> Result<Curve, CliError> {
    let mut curve = Curve {
        name: name.to_string(),
        der_scale: scenario.der_scale,
        points: vec![],
        stopped_at: None,
        reason: None,
    };
    let mut solver = cfg.solver.clone();
    let mut previous = None;
    for &lf in lfs {
        let mut net = apply_scenario(base, &Scenario { lf, ..scenario.clone() })?;
        if let Some(prev) = &previous {
            warm_start(&mut net, prev);
            solver.direct.flat_start = false;
            solver.gsn.inner.flat_start = false;
        }
        match run_solver(&net, &solver) {
            Ok(s) => {
                let v = s
                    .solution
                    .voltage(poi, Phase::P)
                    .ok_or_else(|| CliError::internal(format!("POI bus {poi} has no voltage")))?;
                curve.points.push((lf, v.norm()));
                previous = Some(s.solution);
            }
            Err(e) if e.is_not_converged() => {
                info!("{name}: nose reached, LF {lf} does not converge");
                curve.stopped_at = Some(lf);
                curve.reason = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(curve)
}

pub fn cmd_pvcurve(cfg: &RunConfig) -> Result<PvCurves, CliError> {
    let sweep = cfg.sweep.as_ref().expect("pvcurve has a sweep");
    let case = load_case(&cfg.inputs)?;
    let pois = poi_buses(&case.network);
    if pois.is_empty() {
        return Err(CliError::input("a PV curve needs at least one coupling port"));
    }
    let poi = match sweep.poi {
        Some(b) if pois.contains(&BusId(b)) => BusId(b),
        Some(b) => return Err(CliError::input(format!("bus {b} is not a POI bus"))),
        None => pois[0],
    };
    ensure_dir(&cfg.out)?;
    let lfs = sweep.loading_factors();
    let mut curves = Vec::new();
    for (name, scenario) in scenarios(cfg, sweep) {
        curves.push(sweep_one(&case.network, &name, &scenario, &lfs, poi, cfg)?);
    }
    let result = PvCurves {
        schema: SCHEMA,
        poi: poi.0,
        loading_factors: lfs,
        curves,
    };
    write_csv(&cfg.out.join("pvcurve.csv"), &result)?;
    std::fs::write(cfg.out.join("pvcurve.svg"), svg(&result))?;
    write_json(&cfg.out.join("pvcurve.json"), &result)?;
    let base = &result.curves[0];
    if base.points.is_empty() {
        return Err(CliError::NotConverged {
            message: format!(
                "the first point (LF {}) did not converge: {}",
                result.loading_factors[0],
                base.reason.as_deref().unwrap_or("unknown")
            ),
            report: None,
        });
    }
    if base.stopped_at.is_none() {
        warn!("sweep ended at LF {} before reaching the nose", result.loading_factors.last().unwrap());
    }
    Ok(result)
}

pub fn csv_header(result: &PvCurves) -> Vec<String> {
    std::iter::once("lf".to_string())
        .chain(result.curves.iter().map(|c| c.name.clone()))
        .collect()
}

fn write_csv(path: &Path, result: &PvCurves) -> Result<(), CliError> {
    let mut file = std::fs::File::create(path)?;
    writeln!(file, "{CSV_SCHEMA_LINE}")?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(csv_header(result))?;
    for &lf in &result.loading_factors {
        let cells: Vec<Option<f64>> = result.curves.iter().map(|c| c.at(lf)).collect();
        if cells.iter().all(Option::is_none) {
            break;
        }
        let mut row = vec![format!("{lf}")];
        row.extend(cells.iter().map(|v| v.map(|x| format!("{x:.6}")).unwrap_or_default()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Rows of a PV-curve CSV; empty cells are `None`.
pub type CsvRows = Vec<Vec<Option<f64>>>;

/// Read a PV-curve CSV back into `(header, rows)`.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, CsvRows), CliError> {
    let text = std::fs::read_to_string(path)?;
    let body = text
        .strip_prefix(CSV_SCHEMA_LINE)
        .ok_or_else(|| CliError::input(format!("{} lacks the schema line", path.display())))?;
    let mut r = csv::Reader::from_reader(body.trim_start().as_bytes());
    let header = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        rows.push(rec.iter().map(|c| c.parse().ok()).collect());
    }
    Ok((header, rows))
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// Polylines on plain axes.
pub fn svg(result: &PvCurves) -> String {
    let (w, h, m) = (640.0, 400.0, 56.0);
    let pts: Vec<&(f64, f64)> = result.curves.iter().flat_map(|c| c.points.iter()).collect();
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    if pts.is_empty() {
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">no convergent points</text>"#, w / 2.0, h / 2.0);
        s.push_str("</svg>\n");
        return s;
    }
    let fold = |f: fn(f64, f64) -> f64, init: f64, sel: fn(&(f64, f64)) -> f64| pts.iter().map(|p| sel(p)).fold(init, f);
    let (mut x0, mut x1) = (fold(f64::min, f64::INFINITY, |p| p.0), fold(f64::max, f64::NEG_INFINITY, |p| p.0));
    let (mut y0, mut y1) = (fold(f64::min, f64::INFINITY, |p| p.1), fold(f64::max, f64::NEG_INFINITY, |p| p.1));
    if x1 - x0 < 1e-9 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    let pad = ((y1 - y0) * 0.05).max(1e-3);
    y0 -= pad;
    y1 += pad;
    let px = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let py = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);

    let _ = writeln!(s, r#"<g stroke="black" stroke-width="1">"#);
    let _ = writeln!(s, r#"<line x1="{m}" y1="{}" x2="{}" y2="{}"/>"#, h - m, w - m, h - m);
    let _ = writeln!(s, r#"<line x1="{m}" y1="{m}" x2="{m}" y2="{}"/>"#, h - m);
    s.push_str("</g>\n");
    let _ = writeln!(s, r#"<g font-family="sans-serif" font-size="11">"#);
    for k in 0..=4 {
        let x = x0 + (x1 - x0) * k as f64 / 4.0;
        let y = y0 + (y1 - y0) * k as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{x:.2}</text>"#, px(x), h - m + 16.0);
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{y:.3}</text>"#, m - 6.0, py(y) + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">loading factor</text>"#, w / 2.0, h - 14.0);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">|V| at POI bus {} (pu)</text>"#,
        h / 2.0,
        h / 2.0,
        result.poi
    );
    for (k, c) in result.curves.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let _ = writeln!(s, r#"<text x="{}" y="{}" fill="{color}">{}</text>"#, w - m - 110.0, m + 14.0 * k as f64, c.name);
    }
    s.push_str("</g>\n");
    for (k, c) in result.curves.iter().enumerate() {
        let line: Vec<String> = c.points.iter().map(|p| format!("{:.2},{:.2}", px(p.0), py(p.1))).collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            COLORS[k % COLORS.len()],
            line.join(" ")
        );
    }
    s.push_str("</svg>\n");
    s
}
