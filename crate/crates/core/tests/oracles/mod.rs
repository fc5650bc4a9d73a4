//! Independent reference computations shared by the integration and acceptance suites.
//!
//! Everything here works from the network data in plain complex arithmetic
//! and never calls the stamping code; the unknown index is used only to
//! place values in the solver's row order.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tdflow::circuit::{Circuit, Controls};
use tdflow::netmodel::{
    BranchModel, Bus, BusId, BusKind, Connection, CouplingPort, CurrentInjection, ElementId, ElementKind, Generator,
    HeadSource, IndexMap, Load, LoadClass, Network, Phase, PhaseMatrix, PhaseSet, SeriesElement, Shunt, SlackSource,
    Winding, Zip, C64,
};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `a = e^{j120°}`, the Fortescue operator.
pub fn fortescue_a() -> C64 {
    C64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0)
}

/// Phase-from-sequence matrix: `[a b c]^T = A [0 + -]^T`.
pub fn sequence_to_phase() -> DMatrix<C64> {
    let a = fortescue_a();
    let one = c(1.0, 0.0);
    DMatrix::from_row_slice(3, 3, &[one, one, one, one, a * a, a, one, a, a * a])
}

/// Sequence-from-phase matrix, inverted numerically.
pub fn phase_to_sequence() -> DMatrix<C64> {
    sequence_to_phase().try_inverse().expect("Fortescue matrix is invertible")
}

// ---------------------------------------------------------------------------
// Random small networks

pub struct RandomCase {
    pub network: Network,
    pub controls: Controls,
    pub lambda: f64,
    pub gamma: f64,
    pub relax_shunts: bool,
}

fn random_zip(rng: &mut ChaCha8Rng) -> Zip {
    if rng.gen_bool(0.4) {
        return Zip::CONSTANT_POWER;
    }
    let z = rng.gen_range(0.0..0.5);
    let i = rng.gen_range(0.0..0.5);
    Zip { z, i, p: 1.0 - z - i }
}

fn positive_bus(id: u64, kind: BusKind) -> Bus {
    Bus {
        id: BusId(id),
        name: format!("t{id}"),
        kind,
        phases: PhaseSet::POSITIVE,
        base_kv: 115.0,
        v_init: None,
    }
}

fn feeder_bus(id: u64, kind: BusKind, phases: PhaseSet) -> Bus {
    Bus {
        id: BusId(id),
        name: format!("n{id}"),
        kind,
        phases,
        base_kv: 12.47,
        v_init: None,
    }
}

fn random_subset(rng: &mut ChaCha8Rng, parent: PhaseSet) -> PhaseSet {
    let present: Vec<Phase> = parent.iter().collect();
    if present.len() == 3 && rng.gen_bool(0.6) {
        return parent;
    }
    let keep: Vec<Phase> = present.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
    if keep.is_empty() {
        PhaseSet::from_phases([present[rng.gen_range(0..present.len())]])
    } else {
        PhaseSet::from_phases(keep)
    }
}

/// A transmission grid of 3 to 6 buses (slack, maybe a PV bus, PQ buses,
/// taps, phase shifters, shunts and an external injection) plus one feeder
/// driven either by a coupling port or by an ideal head source. Feeder
/// nodes carry wye and delta ZIP loads, DERs, laterals with missing phases
/// and at most one delta/wye bank. At most 20 nodes in all.
pub fn random_case(seed: u64) -> RandomCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Network {
        name: format!("random-{seed}"),
        s_base_mva: 100.0,
        ..Default::default()
    };
    let nt = rng.gen_range(3..=6u64);
    let has_pv = rng.gen_bool(0.6);
    for id in 1..=nt {
        let kind = match id {
            1 => BusKind::Slack,
            2 if has_pv => BusKind::Pv,
            _ => BusKind::Pq,
        };
        net.buses.push(positive_bus(id, kind));
    }
    net.slacks.push(SlackSource {
        bus: BusId(1),
        voltage: C64::from_polar(rng.gen_range(1.0..1.05), rng.gen_range(-0.1..0.1)),
    });
    if has_pv {
        net.generators.push(Generator {
            bus: BusId(2),
            p: rng.gen_range(0.2..0.8),
            v_set: rng.gen_range(0.98..1.05),
            q_min: -0.5,
            q_max: 0.5,
            in_service: true,
            q_init: 0.0,
        });
    }
    let mut eid = 1;
    let mut pairs: Vec<(u64, u64)> = (2..=nt).map(|k| (rng.gen_range(1..k), k)).collect();
    let (a, b) = (rng.gen_range(1..=nt), rng.gen_range(1..=nt));
    if a != b {
        pairs.push((a, b));
    }
    for (f, t) in pairs {
        let z = c(rng.gen_range(0.005..0.05), rng.gen_range(0.05..0.3));
        let tap = if rng.gen_bool(0.5) { rng.gen_range(0.95..1.05) } else { 1.0 };
        let shift = if rng.gen_bool(0.3) { rng.gen_range(-0.1..0.1) } else { 0.0 };
        net.elements.push(SeriesElement {
            id: ElementId(eid),
            from: BusId(f),
            to: BusId(t),
            kind: if tap != 1.0 { ElementKind::Transformer } else { ElementKind::Line },
            model: BranchModel::Positive {
                y_series: 1.0 / z,
                b_charging: rng.gen_range(0.0..0.1),
                tap,
                shift,
            },
        });
        eid += 1;
    }
    for id in 2..=nt {
        if rng.gen_bool(0.8) {
            net.loads.push(Load {
                bus: BusId(id),
                connection: Connection::Wye,
                power: [c(rng.gen_range(0.1..0.8), rng.gen_range(-0.1..0.3)), c(0.0, 0.0), c(0.0, 0.0)],
                zip: random_zip(&mut rng),
                class: if rng.gen_bool(0.15) { LoadClass::Generation } else { LoadClass::Demand },
            });
        }
    }
    net.shunts.push(Shunt {
        bus: BusId(rng.gen_range(1..=nt)),
        y: [c(rng.gen_range(0.0..0.02), rng.gen_range(-0.1..0.2)), c(0.0, 0.0), c(0.0, 0.0)],
    });
    let pq: Vec<u64> = (2..=nt).filter(|&id| !(has_pv && id == 2)).collect();
    if rng.gen_bool(0.4) {
        net.injections.push(CurrentInjection {
            bus: BusId(pq[rng.gen_range(0..pq.len())]),
            current: c(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)),
            conductance: if rng.gen_bool(0.5) { rng.gen_range(0.0..0.5) } else { 0.0 },
        });
    }

    // Feeder.
    let head = 100u64;
    net.buses.push(feeder_bus(head, BusKind::FeederHead, PhaseSet::ABC));
    if rng.gen_bool(0.7) {
        net.ports.push(CouplingPort {
            name: "port".into(),
            transmission_bus: BusId(pq[rng.gen_range(0..pq.len())]),
            feeder_head: BusId(head),
        });
    } else {
        net.head_sources.push(HeadSource {
            bus: BusId(head),
            voltage: C64::from_polar(rng.gen_range(0.98..1.04), rng.gen_range(-0.1..0.1)),
            feedback: if rng.gen_bool(0.5) { rng.gen_range(0.1..10.0) } else { 0.0 },
        });
    }
    let nf = rng.gen_range(3..=(20 - nt));
    let mut nodes = vec![(head, PhaseSet::ABC)];
    let mut have_bank = false;
    for k in 1..nf {
        let id = head + k;
        let (parent, pphases) = nodes[rng.gen_range(0..nodes.len())];
        let phases = random_subset(&mut rng, pphases);
        let kind = if rng.gen_bool(0.2) { BusKind::InternalNode } else { BusKind::LoadNode };
        net.buses.push(feeder_bus(id, kind, phases));
        let bank = !have_bank && phases == PhaseSet::ABC && pphases == PhaseSet::ABC && rng.gen_bool(0.3);
        let model = if bank {
            have_bank = true;
            let y = 1.0 / c(rng.gen_range(0.005..0.02), rng.gen_range(0.04..0.1));
            BranchModel::ThreePhase {
                phases: PhaseSet::ABC,
                y: PhaseMatrix::diagonal([y; 3]),
                winding: Winding::DeltaWye,
            }
        } else {
            let mut y = PhaseMatrix::zero();
            for p in phases.iter() {
                y.0[p.slot()][p.slot()] = 1.0 / c(rng.gen_range(0.01..0.05), rng.gen_range(0.02..0.12));
            }
            for p in phases.iter() {
                for q in phases.iter().filter(|q| q.slot() > p.slot()) {
                    let m = -y.0[p.slot()][p.slot()] * rng.gen_range(0.05..0.3);
                    y.0[p.slot()][q.slot()] = m;
                    y.0[q.slot()][p.slot()] = m;
                }
            }
            BranchModel::ThreePhase {
                phases,
                y,
                winding: Winding::Series,
            }
        };
        net.elements.push(SeriesElement {
            id: ElementId(eid),
            from: BusId(parent),
            to: BusId(id),
            kind: if bank { ElementKind::Transformer } else { ElementKind::Line },
            model,
        });
        eid += 1;
        nodes.push((id, phases));

        if rng.gen_bool(0.75) {
            let delta = phases == PhaseSet::ABC && rng.gen_bool(0.35);
            let der = rng.gen_bool(0.2);
            let mut power = [c(0.0, 0.0); 3];
            for (slot, p) in Phase::ABC.into_iter().enumerate() {
                if delta || phases.contains(p) {
                    let s = c(rng.gen_range(0.005..0.05), rng.gen_range(-0.01..0.02));
                    power[slot] = if der { -s } else { s };
                }
            }
            net.loads.push(Load {
                bus: BusId(id),
                connection: if delta { Connection::Delta } else { Connection::Wye },
                power,
                zip: random_zip(&mut rng),
                class: if der {
                    LoadClass::Der { group: "pv".into() }
                } else {
                    LoadClass::Demand
                },
            });
        }
    }
    let (cap, cap_phases) = nodes[rng.gen_range(0..nodes.len())];
    let mut y = [c(0.0, 0.0); 3];
    for p in cap_phases.iter() {
        y[p.slot()] = c(0.0, rng.gen_range(0.01..0.05));
    }
    net.shunts.push(Shunt { bus: BusId(cap), y });

    let mut controls = Controls::default();
    if has_pv && rng.gen_bool(0.5) {
        controls.fixed_q.insert(BusId(2), rng.gen_range(-0.5..0.5));
    }
    let lambda = if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(0.0..1.0) };
    RandomCase {
        network: net,
        controls,
        lambda,
        gamma: if rng.gen_bool(0.5) { 1e3 } else { rng.gen_range(1.0..100.0) },
        relax_shunts: rng.gen_bool(0.7),
    }
}

/// Random operating point: voltages near their nominal phasors, auxiliary
/// unknowns anywhere in [-1, 1].
pub fn random_state(circuit: &Circuit, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut x: Vec<f64> = (0..circuit.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    for bus in &circuit.network().buses {
        let phases: Vec<Phase> = if bus.phases.is_positive() {
            vec![Phase::P]
        } else {
            bus.phases.iter().collect()
        };
        for p in phases {
            let v = p.rotation() * C64::from_polar(rng.gen_range(0.9..1.1), rng.gen_range(-0.15..0.15));
            let (r, i) = circuit.index().voltage_pair(bus.id, p).unwrap();
            x[r] = v.re;
            x[i] = v.im;
        }
    }
    x
}

// ---------------------------------------------------------------------------
// Mismatch oracle

fn zip_current(s: C64, zip: Zip, vn: f64, v: C64) -> C64 {
    let (m, ang) = (v.norm(), v.arg());
    let sp = s * zip.p;
    let si = s * zip.i;
    let sz = s * zip.z;
    // Constant power: V conj(I) = S.
    let ip = (sp / v).conj();
    // Constant current: fixed magnitude, fixed angle behind the voltage.
    let ii = if si.norm() == 0.0 {
        c(0.0, 0.0)
    } else {
        C64::from_polar(si.norm() / vn, ang - si.arg())
    };
    // Constant impedance: draws S_z at |V| = vn.
    let iz = if sz.norm() == 0.0 {
        c(0.0, 0.0)
    } else {
        (sz / C64::from_polar(vn, 0.0)).conj() * C64::from_polar(m / vn, ang)
    };
    ip + ii + iz
}

/// Mismatch vector `F(x)` from first principles: currents leaving each
/// node phase, and constraint errors on source and generator rows.
pub fn mismatch_oracle(
    net: &Network,
    index: &IndexMap,
    x: &[f64],
    controls: &Controls,
    lambda: f64,
    gamma: f64,
    relax_shunts: bool,
) -> Vec<f64> {
    let series = 1.0 + lambda * gamma;
    let shunt = if relax_shunts { 1.0 - lambda } else { 1.0 };
    let phase_of = |bus: &Bus, p: Phase| if bus.phases.is_positive() { Phase::P } else { p };
    let bus_of: HashMap<BusId, &Bus> = net.buses.iter().map(|b| (b.id, b)).collect();
    let v = |bus: BusId, p: Phase| -> C64 {
        let (r, i) = index.voltage_pair(bus, p).expect("voltage unknown");
        c(x[r], x[i])
    };
    let mut kcl: BTreeMap<(BusId, Phase), C64> = BTreeMap::new();
    for bus in &net.buses {
        for p in bus.phases.iter() {
            kcl.insert((bus.id, phase_of(bus, p)), c(0.0, 0.0));
        }
    }
    let mut add = |bus: BusId, p: Phase, i: C64| *kcl.get_mut(&(bus, p)).expect("node row") += i;

    for e in &net.elements {
        match &e.model {
            BranchModel::Positive {
                y_series,
                b_charging,
                tap,
                shift,
            } => {
                // Ideal t:1 transformer on the from side feeding a π section.
                let ys = y_series * series;
                let half = c(0.0, b_charging / 2.0 * shunt);
                let t = C64::from_polar(*tap, *shift);
                let (vf, vt) = (v(e.from, Phase::P), v(e.to, Phase::P));
                let vf_inner = vf / t;
                let i_inner = ys * (vf_inner - vt) + half * vf_inner;
                add(e.from, Phase::P, i_inner / t.conj());
                add(e.to, Phase::P, ys * (vt - vf_inner) + half * vt);
            }
            BranchModel::ThreePhase {
                phases,
                y,
                winding: Winding::Series,
            } => {
                for p in phases.iter() {
                    let mut i = c(0.0, 0.0);
                    for q in phases.iter() {
                        let mut ypq = y.get(p, q);
                        if p == q {
                            ypq *= series;
                        }
                        i += ypq * (v(e.from, q) - v(e.to, q));
                    }
                    add(e.from, p, i);
                    add(e.to, p, -i);
                }
            }
            BranchModel::ThreePhase {
                y,
                winding: Winding::DeltaWye,
                ..
            } => {
                // Winding k of the wye side sees the delta voltage (V_k - V_{k-1}) / sqrt(3).
                let yl = y.get(Phase::A, Phase::A) * series;
                let r3 = 3f64.sqrt();
                let vp = Phase::ABC.map(|p| v(e.from, p));
                let vs = Phase::ABC.map(|p| v(e.to, p));
                let mut is = [c(0.0, 0.0); 3];
                for k in 0..3 {
                    let emf = (vp[k] - vp[(k + 2) % 3]) / r3;
                    is[k] = yl * (vs[k] - emf);
                }
                for (k, p) in Phase::ABC.into_iter().enumerate() {
                    add(e.to, p, is[k]);
                    // Power balance through the ideal windings.
                    add(e.from, p, -(is[k] - is[(k + 1) % 3]) / r3);
                }
            }
        }
    }

    for s in &net.shunts {
        let bus = bus_of[&s.bus];
        for p in bus.phases.iter() {
            let q = phase_of(bus, p);
            add(s.bus, q, s.y[p.slot()] * shunt * v(s.bus, q));
        }
    }

    for load in &net.loads {
        let bus = bus_of[&load.bus];
        if bus.phases.is_positive() {
            let vk = v(load.bus, Phase::P);
            add(load.bus, Phase::P, zip_current(load.power[0], load.zip, 1.0, vk));
            continue;
        }
        for (k, p) in Phase::ABC.into_iter().enumerate() {
            let s = load.power[k];
            if s.norm() == 0.0 {
                continue;
            }
            match load.connection {
                Connection::Wye => add(load.bus, p, zip_current(s, load.zip, 1.0, v(load.bus, p))),
                Connection::Delta => {
                    let q = Phase::ABC[(k + 1) % 3];
                    let leg = zip_current(s, load.zip, 3f64.sqrt(), v(load.bus, p) - v(load.bus, q));
                    add(load.bus, p, leg);
                    add(load.bus, q, -leg);
                }
            }
        }
    }

    let mut f = vec![f64::NAN; x.len()];
    fn put(f: &mut [f64], pair: (usize, usize), z: C64) {
        f[pair.0] = z.re;
        f[pair.1] = z.im;
    }

    for g in net.generators.iter().filter(|g| g.in_service) {
        if bus_of[&g.bus].kind != BusKind::Pv {
            continue;
        }
        let q_idx = index.gen_q(g.bus).unwrap();
        let vk = v(g.bus, Phase::P);
        let q = x[q_idx];
        add(g.bus, Phase::P, -(c(g.p, q) / vk).conj());
        let row = match controls.fixed_q.get(&g.bus) {
            Some(&held) => q - held,
            None => vk.norm_sqr() - g.v_set * g.v_set,
        };
        f[q_idx] = row;
    }

    for s in &net.slacks {
        let pair = index.slack_current_pair(s.bus).unwrap();
        add(s.bus, Phase::P, -c(x[pair.0], x[pair.1]));
        put(&mut f, pair, v(s.bus, Phase::P) - s.voltage);
    }

    let a = fortescue_a();
    for port in &net.ports {
        let vp = v(port.transmission_bus, Phase::P);
        let mut ih = [c(0.0, 0.0); 3];
        for (k, p) in Phase::ABC.into_iter().enumerate() {
            let pair = index.head_current_pair(port.feeder_head, p).unwrap();
            ih[k] = c(x[pair.0], x[pair.1]);
            add(port.feeder_head, p, -ih[k]);
            // V_a = V+, V_b = a^2 V+, V_c = a V+.
            let target = [vp, a * a * vp, a * vp][k];
            put(&mut f, pair, v(port.feeder_head, p) - target);
        }
        add(port.transmission_bus, Phase::P, (ih[0] + a * ih[1] + a * a * ih[2]) / 3.0);
    }

    for h in &net.head_sources {
        for (k, p) in Phase::ABC.into_iter().enumerate() {
            let pair = index.head_current_pair(h.bus, p).unwrap();
            let target = [h.voltage, a * a * h.voltage, a * h.voltage][k];
            add(h.bus, p, -c(x[pair.0], x[pair.1]) + h.feedback * (v(h.bus, p) - target));
            put(&mut f, pair, v(h.bus, p) - target);
        }
    }

    for inj in &net.injections {
        add(inj.bus, Phase::P, inj.current + inj.conductance * v(inj.bus, Phase::P));
    }

    for ((bus, p), i) in kcl {
        put(&mut f, index.voltage_pair(bus, p).unwrap(), i);
    }
    assert!(f.iter().all(|v| v.is_finite()), "oracle left a row unset");
    f
}

/// Dense matrix from stamp triplets, summing duplicates.
pub fn dense_from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Vec<Vec<f64>> {
    let mut a = vec![vec![0.0; n]; n];
    for &(r, col, v) in triplets {
        a[r][col] += v;
    }
    a
}

/// Central-difference Jacobian of `f` at `x`, column by column.
pub fn central_difference(f: impl Fn(&[f64]) -> Vec<f64>, x: &[f64], h: f64) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut jac = vec![vec![0.0; n]; n];
    let mut xp = x.to_vec();
    for col in 0..n {
        xp[col] = x[col] + h;
        let fp = f(&xp);
        xp[col] = x[col] - h;
        let fm = f(&xp);
        xp[col] = x[col];
        for row in 0..n {
            jac[row][col] = (fp[row] - fm[row]) / (2.0 * h);
        }
    }
    jac
}

/// Largest `|a - b| / max(|a|, 1)` over all entries.
pub fn max_relative_gap(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs() / x.abs().max(1.0))
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Polar power flow

/// Dense positive-sequence bus admittance matrix.
pub fn ybus(net: &Network, order: &[BusId]) -> DMatrix<C64> {
    let pos: HashMap<BusId, usize> = order.iter().enumerate().map(|(k, b)| (*b, k)).collect();
    let n = order.len();
    let mut y = DMatrix::from_element(n, n, c(0.0, 0.0));
    for e in &net.elements {
        let BranchModel::Positive {
            y_series,
            b_charging,
            tap,
            shift,
        } = e.model
        else {
            panic!("polar oracle takes positive-sequence branches only");
        };
        let t = C64::from_polar(tap, shift);
        let (f, k) = (pos[&e.from], pos[&e.to]);
        let ytt = y_series + c(0.0, b_charging / 2.0);
        y[(f, f)] += ytt / (tap * tap);
        y[(f, k)] -= y_series / t.conj();
        y[(k, f)] -= y_series / t;
        y[(k, k)] += ytt;
    }
    for s in &net.shunts {
        let k = pos[&s.bus];
        y[(k, k)] += s.y[0];
    }
    y
}

/// Standard polar Newton power flow with constant-power loads and the
/// reactive output of PV buses free. `fixed_q` turns listed PV buses into
/// PQ buses at that output. Returns bus voltages in `net.buses` order.
pub fn polar_power_flow(net: &Network, fixed_q: &BTreeMap<BusId, f64>) -> Vec<C64> {
    let order: Vec<BusId> = net.buses.iter().map(|b| b.id).collect();
    let n = order.len();
    let y = ybus(net, &order);
    let mut p_spec = vec![0.0; n];
    let mut q_spec = vec![0.0; n];
    let mut vm = vec![1.0; n];
    let mut va = vec![0.0; n];
    let mut slack = vec![false; n];
    let mut pq = vec![false; n];
    for (k, bus) in net.buses.iter().enumerate() {
        for load in net.loads.iter().filter(|l| l.bus == bus.id) {
            assert_eq!(load.zip, Zip::CONSTANT_POWER);
            p_spec[k] -= load.power[0].re;
            q_spec[k] -= load.power[0].im;
        }
        match bus.kind {
            BusKind::Slack => {
                let s = net.slacks.iter().find(|s| s.bus == bus.id).unwrap();
                slack[k] = true;
                vm[k] = s.voltage.norm();
                va[k] = s.voltage.arg();
            }
            BusKind::Pv => {
                let g = net.regulating_generator(bus.id).unwrap();
                p_spec[k] += g.p;
                match fixed_q.get(&bus.id) {
                    Some(q) => {
                        q_spec[k] += q;
                        pq[k] = true;
                    }
                    None => vm[k] = g.v_set,
                }
            }
            _ => pq[k] = true,
        }
    }
    let ang: Vec<usize> = (0..n).filter(|&k| !slack[k]).collect();
    let mag: Vec<usize> = (0..n).filter(|&k| pq[k]).collect();
    let m = ang.len() + mag.len();
    for _ in 0..50 {
        let v = DVector::from_iterator(n, (0..n).map(|k| C64::from_polar(vm[k], va[k])));
        let ibus = &y * &v;
        let s: Vec<C64> = (0..n).map(|k| v[k] * ibus[k].conj()).collect();
        let mut mis = DVector::zeros(m);
        for (r, &k) in ang.iter().enumerate() {
            mis[r] = s[k].re - p_spec[k];
        }
        for (r, &k) in mag.iter().enumerate() {
            mis[ang.len() + r] = s[k].im - q_spec[k];
        }
        if mis.amax() < 1e-14 {
            break;
        }
        // dS/dVa = j diag(V) conj(diag(I) - Y diag(V)); dS/dVm = diag(V) conj(Y diag(V/|V|)) + conj(diag(I)) diag(V/|V|).
        let mut jac = DMatrix::zeros(m, m);
        for (r, &i) in ang.iter().chain(mag.iter()).enumerate() {
            let real = r < ang.len();
            for (col, &k) in ang.iter().chain(mag.iter()).enumerate() {
                let by_angle = col < ang.len();
                let ds = if by_angle {
                    let mut d = -v[i] * (y[(i, k)] * v[k]).conj();
                    if i == k {
                        d += v[i] * ibus[i].conj();
                    }
                    c(0.0, 1.0) * d
                } else {
                    let u = v[k] / vm[k];
                    let mut d = v[i] * (y[(i, k)] * u).conj();
                    if i == k {
                        d += ibus[i].conj() * u;
                    }
                    d
                };
                jac[(r, col)] = if real { ds.re } else { ds.im };
            }
        }
        let dx = jac.lu().solve(&mis).expect("polar Jacobian is nonsingular");
        for (r, &k) in ang.iter().enumerate() {
            va[k] -= dx[r];
        }
        for (r, &k) in mag.iter().enumerate() {
            vm[k] -= dx[ang.len() + r];
        }
    }
    (0..n).map(|k| C64::from_polar(vm[k], va[k])).collect()
}

/// Net complex power injected at each bus for the given voltages.
pub fn bus_injections(net: &Network, v: &[C64]) -> Vec<C64> {
    let order: Vec<BusId> = net.buses.iter().map(|b| b.id).collect();
    let y = ybus(net, &order);
    let vv = DVector::from_column_slice(v);
    let i = &y * &vv;
    (0..v.len()).map(|k| v[k] * i[k].conj()).collect()
}

// ---------------------------------------------------------------------------
// Block matrices

/// Gelfand estimate of the spectral radius, `||G^k||^(1/k)`, with the
/// powers renormalized as they are squared.
pub fn gelfand(g: &DMatrix<f64>) -> f64 {
    let mut p = g.clone();
    let mut log_scale = 0.0;
    let mut k = 1.0;
    for _ in 0..10 {
        let n = p.norm();
        if n == 0.0 {
            return 0.0;
        }
        p /= n;
        log_scale += n.ln();
        p = &p * &p;
        log_scale *= 2.0;
        k *= 2.0;
    }
    let n = p.norm();
    if n == 0.0 {
        return 0.0;
    }
    ((log_scale + n.ln()) / k).exp()
}

/// Labels matching `block_labels`: block 0 is the border.
pub fn labels_for(sizes: &[usize]) -> Vec<usize> {
    sizes.iter().enumerate().flat_map(|(b, &s)| std::iter::repeat_n(b, s)).collect()
}

/// Bordered block diagonal pattern filled from `values`, cycling.
pub fn bbd(sizes: &[usize], values: &[f64]) -> DMatrix<f64> {
    let n: usize = sizes.iter().sum();
    let labels = labels_for(sizes);
    let mut j = DMatrix::zeros(n, n);
    let mut v = values.iter().cycle();
    for r in 0..n {
        for col in 0..n {
            if labels[r] == labels[col] || labels[r] == 0 || labels[col] == 0 {
                j[(r, col)] = *v.next().unwrap();
            }
        }
    }
    j
}

/// Symmetric BBD matrix with dyadic entries whose diagonal exceeds the
/// in-block off-diagonal sum plus twice the coupling sum. Such a matrix is
/// positive definite, and so is `M + N` of its splitting.
pub fn spd_bbd(sizes: &[usize], seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = sizes.iter().sum();
    let labels = labels_for(sizes);
    let mut j = DMatrix::zeros(n, n);
    for r in 0..n {
        for col in (r + 1)..n {
            if labels[r] == labels[col] || labels[r] == 0 || labels[col] == 0 {
                let v = rng.gen_range(-16i32..=16) as f64 / 16.0;
                j[(r, col)] = v;
                j[(col, r)] = v;
            }
        }
    }
    for r in 0..n {
        let weight: f64 = (0..n)
            .filter(|&col| col != r)
            .map(|col| if labels[col] == labels[r] { 1.0 } else { 2.0 } * j[(r, col)].abs())
            .sum();
        j[(r, r)] = weight + 1.0 + rng.gen_range(0..16) as f64 / 16.0;
    }
    j
}
