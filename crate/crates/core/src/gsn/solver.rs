//! The parallel outer loop: solve every block against the epoch snapshot,
//! exchange port values, repeat until the boundary stops moving.

use std::io::Write;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::boundary::{apply_feedback_augmentation, BoundarySnapshot};
use super::partition::{tear, Partition};
use super::{GsnError, GsnOptions};
use crate::circuit::{Circuit, Controls, HomotopyState};
use crate::netmodel::{validate, Network};
use crate::nrsolve::{solve_circuit_from, Solution};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Infinity norm of the port-value change over this epoch.
    pub boundary_change: f64,
    /// Inner Newton iterations per block, in block order.
    pub inner_iterations: Vec<usize>,
    pub feedback: f64,
    /// Mismatch of the untorn circuit at the exchanged state.
    pub mismatch: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BlockSummary {
    pub id: usize,
    pub name: String,
    pub internal: usize,
    pub external: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GsnReport {
    pub converged: bool,
    pub epochs: usize,
    pub final_mismatch: f64,
    pub blocks: Vec<BlockSummary>,
    pub records: Vec<EpochRecord>,
    pub warnings: Vec<String>,
}

impl GsnReport {
    pub fn boundary_changes(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.boundary_change).collect()
    }

    /// Mean inner iterations per block solve over all epochs.
    pub fn mean_inner_iterations(&self) -> f64 {
        let (sum, count) = self
            .records
            .iter()
            .flat_map(|r| r.inner_iterations.iter())
            .fold((0usize, 0usize), |(s, c), &k| (s + k, c + 1));
        if count == 0 {
            0.0
        } else {
            sum as f64 / count as f64
        }
    }
}

/// Feedback value for the coming epoch.
struct FeedbackSchedule {
    value: f64,
    auto: bool,
    initial: f64,
    decay: f64,
    trigger: usize,
    non_contracting: usize,
    fired: bool,
}

impl FeedbackSchedule {
    fn new(options: &GsnOptions) -> Self {
        FeedbackSchedule {
            value: options.feedback.unwrap_or(0.0),
            auto: options.feedback.is_none() && options.auto_feedback,
            initial: options.feedback_initial,
            decay: options.feedback_decay,
            trigger: options.non_contracting_trigger,
            non_contracting: 0,
            fired: false,
        }
    }

    fn update(&mut self, change: f64, previous: Option<f64>) -> Option<String> {
        if !self.auto {
            return None;
        }
        if self.fired {
            self.value *= self.decay;
            if self.value < 1e-3 {
                self.value = 0.0;
            }
            return None;
        }
        if previous.is_some_and(|p| change >= p) {
            self.non_contracting += 1;
        }
        if self.non_contracting >= self.trigger {
            self.fired = true;
            self.value = self.initial;
            return Some(format!(
                "{} non-contracting epochs; feedback augmentation on at {}",
                self.non_contracting, self.initial
            ));
        }
        None
    }
}

struct BlockResult {
    writes: Vec<(usize, f64)>,
    iterations: usize,
    controls: Controls,
}

fn solve_block(
    partition: &Partition,
    block: usize,
    network: Network,
    x: &[f64],
    controls: &Controls,
    options: &GsnOptions,
) -> Result<BlockResult, GsnError> {
    let fail = |source| GsnError::Subcircuit {
        id: block,
        name: partition.subcircuits[block].name.clone(),
        source: Box::new(source),
    };
    let circuit = Circuit::new(network).map_err(|e| fail(e.into()))?;
    let global = partition.circuit().index();
    let map: Vec<Option<usize>> = circuit.index().vars().iter().map(|v| global.get(v)).collect();
    let mut x0 = circuit.initial_state();
    for (local, g) in map.iter().enumerate() {
        if let Some(g) = g {
            x0[local] = x[*g];
        }
    }
    let (sol, report) = solve_circuit_from(&circuit, x0, controls.clone(), &options.inner).map_err(fail)?;
    let writes = map
        .iter()
        .enumerate()
        .filter_map(|(local, g)| g.map(|g| (g, sol.x[local])))
        .collect();
    Ok(BlockResult {
        writes,
        iterations: report.iterations,
        controls: sol.controls,
    })
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| if x.is_nan() { f64::NAN } else { m.max(x.abs()) })
}

/// Tear `network` at its ports and run the outer loop to convergence.
pub fn solve_gsn(network: &Network, options: &GsnOptions) -> Result<(Solution, GsnReport), GsnError> {
    options.check()?;
    let violations = validate(network);
    if !violations.is_empty() {
        return Err(GsnError::Invalid(violations));
    }
    let mut network = network.clone();
    if options.inner.flat_start {
        for b in &mut network.buses {
            b.v_init = None;
        }
    }
    let partition = tear(&network, options.strict_weak_coupling)?;
    solve_partition(&partition, options)
}

/// Outer loop over an existing partition.
pub fn solve_partition(partition: &Partition, options: &GsnOptions) -> Result<(Solution, GsnReport), GsnError> {
    let mut report = GsnReport {
        blocks: partition
            .subcircuits
            .iter()
            .map(|s| BlockSummary {
                id: s.id,
                name: s.name.clone(),
                internal: s.internal.len(),
                external: s.external.len(),
            })
            .collect(),
        warnings: partition.warnings.clone(),
        ..Default::default()
    };
    for w in &partition.warnings {
        warn!("weak coupling: {w}");
    }
    let mut log = match &options.epoch_log {
        Some(path) => Some(std::io::BufWriter::new(
            std::fs::File::create(path).map_err(|e| GsnError::Io(format!("{}: {e}", path.display())))?,
        )),
        None => None,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.workers)
        .build()
        .map_err(|e| GsnError::Options(format!("worker pool: {e}")))?;

    let circuit = partition.circuit();
    let nblocks = partition.subcircuits.len();
    let mut x = circuit.initial_state();
    let mut controls = vec![Controls::default(); nblocks];
    let mut snapshot = BoundarySnapshot::capture(partition, &x, 0);
    let mut schedule = FeedbackSchedule::new(options);
    let mut previous: Option<f64> = None;
    let homotopy = HomotopyState::off();

    for epoch in 1..=options.max_epochs {
        let started = Instant::now();
        let feedback = schedule.value;
        let networks = apply_feedback_augmentation(partition, &snapshot, feedback);
        let results: Vec<Result<BlockResult, GsnError>> = pool.install(|| {
            networks
                .into_par_iter()
                .enumerate()
                .map(|(k, net)| solve_block(partition, k, net, &x, &controls[k], options))
                .collect()
        });
        let mut iterations = Vec::with_capacity(nblocks);
        for (k, r) in results.into_iter().enumerate() {
            let r = r?;
            for (g, v) in r.writes {
                x[g] = v;
            }
            iterations.push(r.iterations);
            controls[k] = r.controls;
        }

        let next = BoundarySnapshot::capture(partition, &x, epoch);
        let change = next.max_change(&snapshot);
        snapshot = next;
        let merged = merge_controls(&controls);
        let mismatch = inf_norm(&circuit.residual(&x, &homotopy, &merged)?);
        let record = EpochRecord {
            epoch,
            boundary_change: change,
            inner_iterations: iterations,
            feedback,
            mismatch,
            seconds: started.elapsed().as_secs_f64(),
        };
        if options.progress {
            eprintln!(
                "epoch {epoch:>3}  change {change:.3e}  mismatch {mismatch:.3e}  inner {:?}",
                record.inner_iterations
            );
        }
        info!("gsn epoch {epoch}: change {change:.3e}, mismatch {mismatch:.3e}");
        if let Some(w) = log.as_mut() {
            let line = serde_json::to_string(&record).map_err(|e| GsnError::Io(e.to_string()))?;
            writeln!(w, "{line}").map_err(|e| GsnError::Io(e.to_string()))?;
        }
        report.records.push(record);
        report.epochs = epoch;
        report.final_mismatch = mismatch;

        if change <= options.outer_tolerance && mismatch <= options.inner.tolerance + options.outer_tolerance {
            report.converged = true;
            if let Some(w) = log.as_mut() {
                w.flush().map_err(|e| GsnError::Io(e.to_string()))?;
            }
            return Ok((
                Solution {
                    circuit: circuit.clone(),
                    x,
                    controls: merged,
                },
                report,
            ));
        }
        if let Some(msg) = schedule.update(change, previous) {
            warn!("{msg}");
            report.warnings.push(msg);
        }
        previous = Some(change);
    }
    if let Some(w) = log.as_mut() {
        w.flush().map_err(|e| GsnError::Io(e.to_string()))?;
    }
    Err(GsnError::NotConverged {
        epochs: options.max_epochs,
        report: Box::new(report),
    })
}

fn merge_controls(blocks: &[Controls]) -> Controls {
    let mut out = Controls::default();
    for c in blocks {
        out.fixed_q.extend(c.fixed_q.iter().map(|(k, v)| (*k, *v)));
    }
    out
}
