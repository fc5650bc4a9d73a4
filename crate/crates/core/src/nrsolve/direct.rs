//! Newton iteration and the direct solve driver.

use log::{debug, info, warn};

use super::limit::{detect_divergence, limit_step};
use super::qlimits::{enforce_q_limits, QLimitGuard};
use super::schedule::{HomotopySchedule, ScheduleError};
use super::{HomotopyMode, HomotopyPoint, LambdaStep, SolveError, SolveReport, SolverOptions};
use crate::circuit::{port_phase_voltages, Circuit, CircuitError, Controls, HomotopyState};
use crate::netmodel::{validate, BusId, CouplingPort, Network, Phase, C64};
use crate::sparse::{assemble, LuSolver, SparseError};

#[derive(Clone, Debug, PartialEq)]
pub enum StopReason {
    Converged,
    MaxIterations,
    Diverged,
    Singular(String),
    Collapse(String),
}

/// Result of one Newton run at a fixed homotopy factor.
#[derive(Clone, Debug)]
pub struct NewtonOutcome {
    pub x: Vec<f64>,
    pub stop: StopReason,
    /// Mismatch at the start of each iteration; its length is the iteration count.
    pub residual_history: Vec<f64>,
    pub max_linear_residual: f64,
}

impl NewtonOutcome {
    pub fn converged(&self) -> bool {
        self.stop == StopReason::Converged
    }

    pub fn iterations(&self) -> usize {
        self.residual_history.len()
    }

    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(f64::INFINITY)
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| if x.is_nan() { f64::NAN } else { m.max(x.abs()) })
}

/// Newton-Raphson on the Norton-linearized circuit from `x0`.
///
/// Each linear solve returns the full next iterate; limiting then caps the
/// move of every voltage component. Convergence is judged on the nonlinear
/// mismatch only.
pub fn newton(
    circuit: &Circuit,
    x0: &[f64],
    homotopy: &HomotopyState,
    controls: &Controls,
    options: &SolverOptions,
) -> NewtonOutcome {
    let n = circuit.dim();
    let vars = circuit.index().vars();
    let mut x = x0.to_vec();
    let mut history = Vec::new();
    let mut max_linear = 0.0f64;
    let mut solver = LuSolver::new();
    let linear = match circuit.stamp_linear(homotopy) {
        Ok(st) => st,
        Err(e) => {
            return NewtonOutcome {
                x,
                stop: StopReason::Singular(e.to_string()),
                residual_history: history,
                max_linear_residual: 0.0,
            }
        }
    };

    let stop = loop {
        let it = history.len();
        let mut st = linear.clone();
        match circuit.stamp_nonlinear(&x, controls, it) {
            Ok(nl) => st.extend(&nl),
            Err(CircuitError::VoltageCollapse { bus, phase, magnitude }) => {
                break StopReason::Collapse(format!("bus {bus} phase {phase} at |V| = {magnitude:.3e}"));
            }
            Err(e) => break StopReason::Singular(e.to_string()),
        }
        let norm = inf_norm(&st.residual(&x));
        history.push(norm);
        debug!("newton lambda={} it={} |F|={:.3e}", homotopy.lambda, it + 1, norm);
        if norm <= options.tolerance && history.len() >= options.min_iterations {
            break StopReason::Converged;
        }
        if detect_divergence(&history, options.divergence_window, options.divergence_ratio) {
            break StopReason::Diverged;
        }
        if history.len() >= options.max_iterations {
            break StopReason::MaxIterations;
        }

        let system = match assemble(&st.triplets, &st.rhs, n) {
            Ok(s) => s,
            Err(e) => break StopReason::Singular(e.to_string()),
        };
        if let Some(path) = &options.dump_matrix {
            if let Err(e) = system.matrix.write_matrix_market(path) {
                warn!("could not write matrix to {}: {e}", path.display());
            }
        }
        let x_new = match solver.solve(&system) {
            Ok((x_new, stats)) => {
                max_linear = max_linear.max(stats.residual);
                x_new
            }
            Err(SparseError::Inaccurate { residual }) => {
                max_linear = max_linear.max(residual);
                break StopReason::Singular(format!("linear solve residual {residual:.3e}"));
            }
            Err(e) => break StopReason::Singular(e.to_string()),
        };
        if options.limiting {
            limit_step(&mut x, &x_new, vars, options.dv_max, options.v_min, options.v_max);
        } else {
            x = x_new;
        }
    };
    NewtonOutcome {
        x,
        stop,
        residual_history: history,
        max_linear_residual: max_linear,
    }
}

fn absorb(report: &mut SolveReport, lambda: f64, out: &NewtonOutcome) {
    report.lambda_trajectory.push(LambdaStep {
        lambda,
        converged: out.converged(),
        iterations: out.iterations(),
    });
    report.residual_history.extend_from_slice(&out.residual_history);
    report.iterations += out.iterations();
    report.final_residual = out.final_residual();
    report.max_linear_residual = report.max_linear_residual.max(out.max_linear_residual);
}

fn describe(stop: &StopReason) -> String {
    match stop {
        StopReason::Converged => "converged".into(),
        StopReason::MaxIterations => "iteration limit reached".into(),
        StopReason::Diverged => "mismatch diverging".into(),
        StopReason::Singular(m) => format!("singular system: {m}"),
        StopReason::Collapse(m) => format!("voltage collapse: {m}"),
    }
}

/// Drive lambda to zero for fixed controls, starting from `x0`.
fn solve_with_homotopy(
    circuit: &Circuit,
    x0: &[f64],
    controls: &Controls,
    options: &SolverOptions,
    report: &mut SolveReport,
) -> Result<Vec<f64>, SolveError> {
    let base = HomotopyState::new(0.0, options.gamma, options.relax_shunts);
    let unsolvable = |reason: String, smallest: f64, report: &SolveReport| SolveError::Unsolvable {
        reason,
        smallest_lambda: smallest,
        report: Box::new(report.clone()),
    };

    if options.homotopy == HomotopyMode::Off {
        let out = newton(circuit, x0, &base, controls, options);
        absorb(report, 0.0, &out);
        return if out.converged() {
            Ok(out.x)
        } else {
            Err(unsolvable(describe(&out.stop), 0.0, report))
        };
    }

    let start = if options.homotopy == HomotopyMode::On { 1.0 } else { 0.0 };
    let mut schedule = HomotopySchedule::new(start, options.lambda_step, options.lambda_min_step);
    let mut last_good: Option<Vec<f64>> = None;
    loop {
        let lambda = schedule.current();
        let from = match (&last_good, schedule.warm_start()) {
            (Some(x), true) => x.as_slice(),
            _ => x0,
        };
        let out = newton(circuit, from, &base.with_lambda(lambda), controls, options);
        absorb(report, lambda, &out);
        let converged = out.converged();
        if converged {
            if options.record_homotopy_states {
                report.homotopy_states.push(HomotopyPoint {
                    lambda,
                    state: out.x.clone(),
                });
            }
            last_good = Some(out.x);
        } else if lambda > 0.0 || start > 0.0 {
            info!("homotopy step at lambda = {lambda} failed: {}", describe(&out.stop));
        }
        match schedule.advance(converged) {
            Ok(None) => return Ok(last_good.expect("lambda = 0 converged")),
            Ok(Some(next)) => debug!("homotopy next lambda = {next}"),
            Err(ScheduleError::Exhausted) => {
                return Err(unsolvable("no convergence even at lambda = 1".into(), 1.0, report));
            }
            Err(ScheduleError::Underflow { smallest_lambda, .. }) => {
                return Err(unsolvable(
                    "homotopy step underflow".into(),
                    smallest_lambda,
                    report,
                ));
            }
        }
    }
}

/// Solve a prepared circuit: homotopy per control state, then the reactive-limit loop.
pub fn solve_circuit(circuit: &Circuit, options: &SolverOptions) -> Result<(Solution, SolveReport), SolveError> {
    solve_circuit_from(circuit, circuit.initial_state(), Controls::default(), options)
}

/// [`solve_circuit`] from a given state and starting controls.
pub fn solve_circuit_from(
    circuit: &Circuit,
    x0: Vec<f64>,
    controls: Controls,
    options: &SolverOptions,
) -> Result<(Solution, SolveReport), SolveError> {
    options.check()?;
    if x0.len() != circuit.dim() {
        return Err(SolveError::Options(format!(
            "start vector has {} entries, circuit has {}",
            x0.len(),
            circuit.dim()
        )));
    }
    let mut report = SolveReport::default();
    let mut controls = controls;
    let mut guard = QLimitGuard::new(options.max_q_switches);
    let mut x = x0;
    let mut rounds = 0;
    loop {
        x = solve_with_homotopy(circuit, &x, &controls, options, &mut report)?;
        if !options.q_limits {
            break;
        }
        let switches = enforce_q_limits(circuit, &x, &mut controls, &mut guard, &mut report.warnings);
        if switches.is_empty() {
            break;
        }
        for s in &switches {
            info!("reactive limit switch at bus {}: {:?} (Q = {:.4})", s.bus, s.kind, s.q);
        }
        report.q_switches.extend(switches);
        rounds += 1;
        if rounds >= options.max_control_rounds {
            report.warnings.push(format!(
                "reactive-limit loop stopped after {rounds} rounds with controls still changing"
            ));
            break;
        }
    }

    let f = circuit.residual(&x, &HomotopyState::new(0.0, options.gamma, options.relax_shunts), &controls)?;
    report.final_residual = inf_norm(&f);
    report.converged = report.final_residual <= options.tolerance;
    for w in &report.warnings {
        warn!("{w}");
    }
    Ok((
        Solution {
            circuit: circuit.clone(),
            x,
            controls,
        },
        report,
    ))
}

/// Validate, build the circuit and solve.
pub fn solve_direct(network: &Network, options: &SolverOptions) -> Result<(Solution, SolveReport), SolveError> {
    let violations = validate(network);
    if !violations.is_empty() {
        return Err(SolveError::Invalid(violations));
    }
    let mut network = network.clone();
    if options.flat_start {
        for b in &mut network.buses {
            b.v_init = None;
        }
    }
    let circuit = Circuit::new(network)?;
    solve_circuit(&circuit, options)
}

/// A converged operating point with accessors in network terms.
#[derive(Clone, Debug)]
pub struct Solution {
    pub circuit: Circuit,
    pub x: Vec<f64>,
    pub controls: Controls,
}

impl Solution {
    pub fn network(&self) -> &Network {
        self.circuit.network()
    }

    pub fn voltage(&self, bus: BusId, phase: Phase) -> Option<C64> {
        self.circuit.voltage(&self.x, bus, phase)
    }

    /// Phase voltages by slot; positive-sequence buses fill slot 0.
    pub fn bus_voltages(&self, bus: BusId) -> [Option<C64>; 3] {
        self.circuit.bus_voltages(&self.x, bus).unwrap_or([None; 3])
    }

    pub fn generator_q(&self, bus: BusId) -> Option<f64> {
        self.circuit.generator_q(&self.x, bus)
    }

    pub fn slack_power(&self, bus: BusId) -> Option<C64> {
        let v = self.voltage(bus, Phase::P)?;
        let i = self.circuit.slack_current(&self.x, bus)?;
        Some(v * i.conj())
    }

    /// Three-phase power delivered into the feeder head, in system per-unit.
    ///
    /// Equals the positive-sequence power drawn at the transmission side.
    pub fn port_power(&self, port: &CouplingPort) -> Option<C64> {
        let vp = self.voltage(port.transmission_bus, Phase::P)?;
        let i = self.circuit.head_currents(&self.x, port.feeder_head)?;
        let v = port_phase_voltages(vp);
        Some((0..3).map(|k| v[k] * i[k].conj()).sum::<C64>() / 3.0)
    }

    /// Infinity norm of the mismatch at lambda = 0 under the final controls.
    pub fn mismatch(&self) -> Result<f64, CircuitError> {
        let f = self.circuit.residual(&self.x, &HomotopyState::off(), &self.controls)?;
        Ok(inf_norm(&f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::testing::{small_feeder_network, two_bus_network};

    #[test]
    fn two_bus_converges_quadratically() {
        let (sol, rep) = solve_direct(&two_bus_network(), &SolverOptions::default()).unwrap();
        assert!(rep.converged);
        assert!(rep.iterations <= 8, "{rep:?}");
        assert_eq!(rep.residual_history.len(), rep.iterations);
        assert!(sol.mismatch().unwrap() <= 1e-6);
        assert!(!rep.homotopy_engaged());
    }

    #[test]
    fn zero_load_is_solved_by_flat_start() {
        let mut net = two_bus_network();
        net.loads.clear();
        if let crate::netmodel::BranchModel::Positive { b_charging, .. } = &mut net.elements[0].model {
            *b_charging = 0.0;
        }
        let (_, rep) = solve_direct(&net, &SolverOptions::default()).unwrap();
        assert!(rep.iterations <= 2);
    }

    #[test]
    fn combined_network_converges() {
        let (sol, rep) = solve_direct(&small_feeder_network(), &SolverOptions::default()).unwrap();
        assert!(rep.converged, "{rep:?}");
        let port = &sol.network().ports[0].clone();
        let s = sol.port_power(port).unwrap();
        assert!(s.re > 0.0);
    }

    #[test]
    fn forced_homotopy_reaches_same_point() {
        let plain = solve_direct(&two_bus_network(), &SolverOptions::default()).unwrap().0;
        let opts = SolverOptions {
            homotopy: HomotopyMode::On,
            record_homotopy_states: true,
            ..Default::default()
        };
        let (stepped, rep) = solve_direct(&two_bus_network(), &opts).unwrap();
        assert!(rep.homotopy_engaged());
        assert_eq!(rep.homotopy_states.first().unwrap().lambda, 1.0);
        let a = plain.voltage(BusId(2), Phase::P).unwrap();
        let b = stepped.voltage(BusId(2), Phase::P).unwrap();
        assert!((a - b).norm() < 1e-5);
    }

    #[test]
    fn invalid_options_rejected() {
        let opts = SolverOptions {
            v_min: 3.0,
            ..Default::default()
        };
        assert!(matches!(
            solve_direct(&two_bus_network(), &opts),
            Err(SolveError::Options(_))
        ));
    }
}
