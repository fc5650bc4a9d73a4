use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::homotopy::{apply_homotopy_positive_sequence, apply_homotopy_three_phase, HomotopyState};
use super::loads::{eval_pq_positive_sequence, eval_pq_three_phase, eval_zip, Collapse};
use super::{CircuitError, StampSet};
use crate::netmodel::{
    build_index_map, BranchModel, Bus, BusId, BusKind, Connection, CouplingPort, IndexMap, Network, Phase,
    PhaseSet, Var, Winding, C64,
};

/// Control-variable state layered over the network's bus types.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Controls {
    /// PV buses held at a reactive limit instead of their voltage setpoint.
    pub fixed_q: BTreeMap<BusId, f64>,
}

/// A network bound to its unknown ordering, ready for stamping.
#[derive(Clone, Debug)]
pub struct Circuit {
    network: Network,
    index: IndexMap,
    bus_pos: HashMap<BusId, usize>,
}

type Pair = (usize, usize);

impl Circuit {
    pub fn new(network: Network) -> Result<Self, CircuitError> {
        let index = build_index_map(&network)?;
        let bus_pos = network.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect();
        Ok(Circuit {
            network,
            index,
            bus_pos,
        })
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn index(&self) -> &IndexMap {
        &self.index
    }

    pub fn dim(&self) -> usize {
        self.index.len()
    }

    pub fn bus(&self, id: BusId) -> Result<&Bus, CircuitError> {
        self.bus_pos
            .get(&id)
            .map(|&i| &self.network.buses[i])
            .ok_or_else(|| CircuitError::Inconsistent(format!("bus {id} is not in the network")))
    }

    fn vpair(&self, bus: BusId, phase: Phase) -> Result<Pair, CircuitError> {
        self.index
            .voltage_pair(bus, phase)
            .ok_or_else(|| CircuitError::Inconsistent(format!("bus {bus} has no phase {phase}")))
    }

    /// Positive-sequence phase for transmission buses, otherwise `phase` itself.
    fn phase_at(&self, bus: &Bus, phase: Phase) -> Phase {
        if bus.phases.is_positive() {
            Phase::P
        } else {
            phase
        }
    }

    pub fn voltage(&self, x: &[f64], bus: BusId, phase: Phase) -> Option<C64> {
        let (r, i) = self.index.voltage_pair(bus, phase)?;
        Some(C64::new(x[r], x[i]))
    }

    /// Current injected into a driven feeder head, per phase.
    pub fn head_currents(&self, x: &[f64], head: BusId) -> Option<[C64; 3]> {
        let mut out = [C64::new(0.0, 0.0); 3];
        for (k, p) in Phase::ABC.into_iter().enumerate() {
            let (r, i) = self.index.head_current_pair(head, p)?;
            out[k] = C64::new(x[r], x[i]);
        }
        Some(out)
    }

    /// Current injected by the slack source at `bus`.
    pub fn slack_current(&self, x: &[f64], bus: BusId) -> Option<C64> {
        let (r, i) = self.index.slack_current_pair(bus)?;
        Some(C64::new(x[r], x[i]))
    }

    pub fn generator_q(&self, x: &[f64], bus: BusId) -> Option<f64> {
        self.index.gen_q(bus).map(|k| x[k])
    }

    /// Flat start (or stored initial voltages) with sources at their set values.
    pub fn initial_state(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        for (k, var) in self.index.vars().iter().enumerate() {
            x[k] = match *var {
                Var::Voltage { bus, phase, part } => {
                    let b = &self.network.buses[self.bus_pos[&bus]];
                    let v = b.initial_voltage(phase);
                    match part {
                        crate::netmodel::Part::Re => v.re,
                        crate::netmodel::Part::Im => v.im,
                    }
                }
                Var::GenQ { bus } => self.network.regulating_generator(bus).map(|g| g.q_init).unwrap_or(0.0),
                _ => 0.0,
            };
        }
        for s in &self.network.slacks {
            if let Some((r, i)) = self.index.voltage_pair(s.bus, Phase::P) {
                x[r] = s.voltage.re;
                x[i] = s.voltage.im;
            }
        }
        x
    }

    /// Stamps that do not depend on the state: branches, shunts, sources and ports.
    pub fn stamp_linear(&self, homotopy: &HomotopyState) -> Result<StampSet, CircuitError> {
        let mut st = StampSet::new(0);
        let shunt_scale = homotopy.shunt_scale();

        for e in &self.network.elements {
            match &e.model {
                BranchModel::Positive {
                    y_series,
                    b_charging,
                    tap,
                    shift,
                } => {
                    let ys = apply_homotopy_positive_sequence(*y_series, homotopy);
                    let half = C64::new(0.0, 0.5 * b_charging * shunt_scale);
                    let t = C64::from_polar(*tap, *shift);
                    let yff = (ys + half) / (tap * tap);
                    let yft = -ys / t.conj();
                    let ytf = -ys / t;
                    let ytt = ys + half;
                    let f = self.vpair(e.from, Phase::P)?;
                    let to = self.vpair(e.to, Phase::P)?;
                    st.add_complex(f, f, yff);
                    st.add_complex(f, to, yft);
                    st.add_complex(to, f, ytf);
                    st.add_complex(to, to, ytt);
                }
                BranchModel::ThreePhase { phases, y, winding } => {
                    let yh = apply_homotopy_three_phase(y, homotopy);
                    match winding {
                        Winding::Series => {
                            for p in phases.iter() {
                                for q in phases.iter() {
                                    let ypq = yh.get(p, q);
                                    if ypq.norm() == 0.0 {
                                        continue;
                                    }
                                    let (fp, fq) = (self.vpair(e.from, p)?, self.vpair(e.from, q)?);
                                    let (tp, tq) = (self.vpair(e.to, p)?, self.vpair(e.to, q)?);
                                    st.add_complex(fp, fq, ypq);
                                    st.add_complex(fp, tq, -ypq);
                                    st.add_complex(tp, fq, -ypq);
                                    st.add_complex(tp, tq, ypq);
                                }
                            }
                        }
                        Winding::DeltaWye => {
                            let blocks = delta_wye_blocks(yh.0[0][0]);
                            let ends = [e.from, e.to];
                            for (bi, row_bus) in ends.iter().enumerate() {
                                for (bj, col_bus) in ends.iter().enumerate() {
                                    let blk = &blocks[bi][bj];
                                    for (r, pr) in Phase::ABC.into_iter().enumerate() {
                                        for (c, pc) in Phase::ABC.into_iter().enumerate() {
                                            if blk[r][c].norm() == 0.0 {
                                                continue;
                                            }
                                            let rows = self.vpair(*row_bus, pr)?;
                                            let cols = self.vpair(*col_bus, pc)?;
                                            st.add_complex(rows, cols, blk[r][c]);
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }

        for s in &self.network.shunts {
            let bus = self.bus(s.bus)?;
            for p in bus.phases.iter() {
                let y = s.y[p.slot()] * shunt_scale;
                if s.y[p.slot()].norm() == 0.0 {
                    continue;
                }
                let v = self.vpair(s.bus, p)?;
                st.add_complex(v, v, y);
            }
        }

        for s in &self.network.slacks {
            let v = self.vpair(s.bus, Phase::P)?;
            let cur = self.index.slack_current_pair(s.bus).ok_or_else(|| {
                CircuitError::Inconsistent(format!("slack bus {} has no current unknowns", s.bus))
            })?;
            stamp_ideal_source(&mut st, v, cur, s.voltage);
        }

        for h in &self.network.head_sources {
            let cur = self.head_pairs(h.bus)?;
            for (k, p) in Phase::ABC.into_iter().enumerate() {
                let v = self.vpair(h.bus, p)?;
                let target = p.rotation() * h.voltage;
                stamp_ideal_source(&mut st, v, cur[k], target);
                if h.feedback != 0.0 {
                    st.add_complex(v, v, C64::new(h.feedback, 0.0));
                    st.add_rhs_complex(v, target * h.feedback);
                }
            }
        }

        for port in &self.network.ports {
            st.extend(&self.stamp_coupling_port(port)?);
        }

        for inj in &self.network.injections {
            let v = self.vpair(inj.bus, Phase::P)?;
            st.add_rhs_complex(v, -inj.current);
            if inj.conductance != 0.0 {
                st.add_complex(v, v, C64::new(inj.conductance, 0.0));
            }
        }
        Ok(st)
    }

    fn head_pairs(&self, head: BusId) -> Result<[Pair; 3], CircuitError> {
        let mut out = [(0, 0); 3];
        for (k, p) in Phase::ABC.into_iter().enumerate() {
            out[k] = self.index.head_current_pair(head, p).ok_or_else(|| {
                CircuitError::Inconsistent(format!("feeder head {head} has no source current unknowns"))
            })?;
        }
        Ok(out)
    }

    /// Six controlled voltage sources at the feeder head and the
    /// positive-sequence current they draw from the transmission bus.
    pub fn stamp_coupling_port(&self, port: &CouplingPort) -> Result<StampSet, CircuitError> {
        let mut st = StampSet::new(0);
        let vp = self.vpair(port.transmission_bus, Phase::P)?;
        let cur = self.head_pairs(port.feeder_head)?;
        for (k, p) in Phase::ABC.into_iter().enumerate() {
            let v = self.vpair(port.feeder_head, p)?;
            let rot = p.rotation();
            // Head KCL: the source delivers I^φ into the head node.
            st.add(v.0, cur[k].0, -1.0);
            st.add(v.1, cur[k].1, -1.0);
            // Source row: V^φ - rot_φ V^p = 0.
            st.add(cur[k].0, v.0, 1.0);
            st.add(cur[k].1, v.1, 1.0);
            st.add_complex(cur[k], vp, -rot);
            // Transmission KCL: the bus supplies (1/3) Σ conj(rot_φ) I^φ.
            st.add_complex(vp, cur[k], rot.conj() / 3.0);
        }
        Ok(st)
    }

    /// Norton stamps of loads and PV generators linearized at `x`.
    pub fn stamp_nonlinear(&self, x: &[f64], controls: &Controls, iteration: usize) -> Result<StampSet, CircuitError> {
        let mut st = StampSet::new(iteration);
        let collapse = |bus: BusId, phase: Phase, c: Collapse| CircuitError::VoltageCollapse {
            bus,
            phase,
            magnitude: c.magnitude,
        };

        for load in &self.network.loads {
            if load.is_zero() {
                continue;
            }
            let bus = self.bus(load.bus)?;
            if bus.phases.is_positive() {
                let v = self.vpair(load.bus, Phase::P)?;
                let vk = C64::new(x[v.0], x[v.1]);
                let (i, j) = eval_zip(load.power[0], load.zip, 1.0, vk).map_err(|c| collapse(load.bus, Phase::P, c))?;
                stamp_norton(&mut st, v, v, j, vk, i);
                continue;
            }

            if load.connection == Connection::Delta && bus.phases != PhaseSet::ABC {
                return Err(CircuitError::Inconsistent(format!(
                    "delta load at bus {} needs phases abc",
                    load.bus
                )));
            }
            let mut vk = [C64::new(0.0, 0.0); 3];
            let mut pairs = [None; 3];
            for (k, p) in Phase::ABC.into_iter().enumerate() {
                if bus.phases.contains(p) {
                    let v = self.vpair(load.bus, p)?;
                    vk[k] = C64::new(x[v.0], x[v.1]);
                    pairs[k] = Some(v);
                } else if load.connection == Connection::Wye && load.power[k].norm() != 0.0 {
                    return Err(CircuitError::Inconsistent(format!(
                        "load at bus {} draws on missing phase {p}",
                        load.bus
                    )));
                }
            }
            let e = eval_pq_three_phase(load, vk).map_err(|(p, c)| collapse(load.bus, p, c))?;

            // Structural coupling between phase slots.
            let mut coupled = [[false; 3]; 3];
            for k in 0..3 {
                if load.power[k].norm() == 0.0 {
                    continue;
                }
                match load.connection {
                    Connection::Wye => coupled[k][k] = true,
                    Connection::Delta => {
                        let legs = [k, (k + 1) % 3];
                        for a in legs {
                            for b in legs {
                                coupled[a][b] = true;
                            }
                        }
                    }
                }
            }
            for k in 0..3 {
                let Some(rows) = pairs[k] else { continue };
                let mut norton = -e.currents[k];
                for m in 0..3 {
                    if !coupled[k][m] {
                        continue;
                    }
                    let cols = pairs[m].expect("coupled phases are present");
                    let j = [
                        [e.jacobian[2 * k][2 * m], e.jacobian[2 * k][2 * m + 1]],
                        [e.jacobian[2 * k + 1][2 * m], e.jacobian[2 * k + 1][2 * m + 1]],
                    ];
                    for r in 0..2 {
                        for c in 0..2 {
                            st.add([rows.0, rows.1][r], [cols.0, cols.1][c], j[r][c]);
                        }
                    }
                    norton += C64::new(
                        j[0][0] * vk[m].re + j[0][1] * vk[m].im,
                        j[1][0] * vk[m].re + j[1][1] * vk[m].im,
                    );
                }
                st.add_rhs_complex(rows, norton);
            }
        }

        for bus in self.network.buses.iter().filter(|b| b.kind == BusKind::Pv) {
            let gen = self.network.regulating_generator(bus.id).ok_or_else(|| {
                CircuitError::Inconsistent(format!("PV bus {} has no in-service generator", bus.id))
            })?;
            let q_idx = self
                .index
                .gen_q(bus.id)
                .ok_or_else(|| CircuitError::Inconsistent(format!("PV bus {} has no Q unknown", bus.id)))?;
            let v = self.vpair(bus.id, Phase::P)?;
            let (vr, vi, q) = (x[v.0], x[v.1], x[q_idx]);
            let e = eval_pq_positive_sequence(-gen.p, -q, vr, vi).map_err(|c| collapse(bus.id, Phase::P, c))?;
            let d = vr * vr + vi * vi;
            let dq = [-vi / d, vr / d];
            let j = e.jacobian();
            let cur = [e.i_r, e.i_i];
            for r in 0..2 {
                let row = [v.0, v.1][r];
                st.add(row, v.0, j[r][0]);
                st.add(row, v.1, j[r][1]);
                st.add(row, q_idx, dq[r]);
                st.add_rhs(row, j[r][0] * vr + j[r][1] * vi + dq[r] * q - cur[r]);
            }
            match controls.fixed_q.get(&bus.id) {
                Some(&q_fixed) => {
                    st.add(q_idx, q_idx, 1.0);
                    st.add_rhs(q_idx, q_fixed);
                }
                None => {
                    st.add(q_idx, v.0, 2.0 * vr);
                    st.add(q_idx, v.1, 2.0 * vi);
                    st.add_rhs(q_idx, d + gen.v_set * gen.v_set);
                }
            }
        }
        Ok(st)
    }

    /// Linear and nonlinear stamps together.
    pub fn stamps(
        &self,
        x: &[f64],
        homotopy: &HomotopyState,
        controls: &Controls,
        iteration: usize,
    ) -> Result<StampSet, CircuitError> {
        let mut st = self.stamp_linear(homotopy)?;
        st.extend(&self.stamp_nonlinear(x, controls, iteration)?);
        st.iteration = iteration;
        Ok(st)
    }

    /// Nonlinear mismatch `F(x)`: KCL current residuals on node rows and
    /// constraint residuals on source and generator rows.
    pub fn residual(&self, x: &[f64], homotopy: &HomotopyState, controls: &Controls) -> Result<Vec<f64>, CircuitError> {
        Ok(self.stamps(x, homotopy, controls, 0)?.residual(x))
    }

    /// Phase voltages of a bus (positive-sequence buses fill slot 0 only).
    pub fn bus_voltages(&self, x: &[f64], bus: BusId) -> Result<[Option<C64>; 3], CircuitError> {
        let b = self.bus(bus)?;
        let mut out = [None; 3];
        for p in b.phases.iter() {
            out[p.slot()] = self.voltage(x, bus, self.phase_at(b, p));
        }
        Ok(out)
    }
}

/// Ideal voltage source on a node pair with its current unknown pair.
fn stamp_ideal_source(st: &mut StampSet, v: Pair, cur: Pair, target: C64) {
    st.add(v.0, cur.0, -1.0);
    st.add(v.1, cur.1, -1.0);
    st.add(cur.0, v.0, 1.0);
    st.add(cur.1, v.1, 1.0);
    st.add_rhs_complex(cur, target);
}

fn stamp_norton(st: &mut StampSet, rows: Pair, cols: Pair, j: [[f64; 2]; 2], vk: C64, i: C64) {
    let r = [rows.0, rows.1];
    let c = [cols.0, cols.1];
    for a in 0..2 {
        for b in 0..2 {
            st.add(r[a], c[b], j[a][b]);
        }
    }
    st.add_rhs(rows.0, j[0][0] * vk.re + j[0][1] * vk.im - i.re);
    st.add_rhs(rows.1, j[1][0] * vk.re + j[1][1] * vk.im - i.im);
}

/// Nodal blocks `[[Ypp, Yps], [Ysp, Yss]]` of a delta (from) / grounded-wye (to) bank.
fn delta_wye_blocks(y: C64) -> [[[[C64; 3]; 3]; 2]; 2] {
    let z = C64::new(0.0, 0.0);
    let y2 = y / 3.0;
    let y3 = y / 3f64.sqrt();
    let ypp = [[2.0 * y2, -y2, -y2], [-y2, 2.0 * y2, -y2], [-y2, -y2, 2.0 * y2]];
    let yps = [[-y3, y3, z], [z, -y3, y3], [y3, z, -y3]];
    let mut ysp = [[z; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            ysp[i][j] = yps[j][i];
        }
    }
    let yss = [[y, z, z], [z, y, z], [z, z, y]];
    [[ypp, yps], [ysp, yss]]
}
