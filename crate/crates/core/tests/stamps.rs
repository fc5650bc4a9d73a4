mod oracles;

use oracles::*;
use tdflow::circuit::{
    port_current_matrix, port_phase_voltages, positive_sequence_current, sequence_components, Circuit, HomotopyState,
};
use tdflow::netmodel::{validate, BusId, Phase, C64};

const CASES: u64 = 24;

fn case_circuit(seed: u64) -> (RandomCase, Circuit) {
    let case = random_case(seed);
    // A head-source feeder is an island by construction.
    let islanded = !case.network.head_sources.is_empty();
    let violations: Vec<_> = validate(&case.network)
        .into_iter()
        .filter(|v| !(islanded && v.message.contains("connected components")))
        .collect();
    assert!(violations.is_empty(), "seed {seed}: {violations:?}");
    let circuit = Circuit::new(case.network.clone()).unwrap();
    (case, circuit)
}

#[test]
fn random_networks_cover_the_element_mix() {
    let mut delta = 0;
    let mut banks = 0;
    let mut ports = 0;
    let mut laterals = 0;
    for seed in 0..CASES {
        let case = random_case(seed);
        let net = &case.network;
        assert!(net.buses.len() <= 20);
        delta += net.loads.iter().filter(|l| l.connection == tdflow::netmodel::Connection::Delta).count();
        banks += net
            .elements
            .iter()
            .filter(|e| matches!(e.model, tdflow::netmodel::BranchModel::ThreePhase { winding: tdflow::netmodel::Winding::DeltaWye, .. }))
            .count();
        ports += net.ports.len();
        laterals += net.buses.iter().filter(|b| !b.is_transmission() && b.phases.len() < 3).count();
    }
    assert!(delta > 0 && banks > 0 && ports > 0 && laterals > 0);
}

#[test]
fn residual_matches_dense_complex_oracle() {
    for seed in 0..CASES {
        let (case, circuit) = case_circuit(seed);
        let x = random_state(&circuit, seed);
        let h = HomotopyState::new(case.lambda, case.gamma, case.relax_shunts);
        let f = circuit.residual(&x, &h, &case.controls).unwrap();
        let oracle = mismatch_oracle(
            &case.network,
            circuit.index(),
            &x,
            &case.controls,
            case.lambda,
            case.gamma,
            case.relax_shunts,
        );
        let gap = f.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(gap <= 1e-9, "seed {seed}: residual gap {gap:e}");
    }
}

#[test]
fn jacobian_matches_central_differences() {
    for seed in 0..CASES {
        let (case, circuit) = case_circuit(seed);
        let x = random_state(&circuit, seed);
        let h = HomotopyState::new(case.lambda, case.gamma, case.relax_shunts);
        let st = circuit.stamps(&x, &h, &case.controls, 0).unwrap();
        let analytic = dense_from_triplets(circuit.dim(), &st.triplets);
        let fd = central_difference(
            |y| {
                mismatch_oracle(
                    &case.network,
                    circuit.index(),
                    y,
                    &case.controls,
                    case.lambda,
                    case.gamma,
                    case.relax_shunts,
                )
            },
            &x,
            1e-6,
        );
        let gap = max_relative_gap(&analytic, &fd);
        assert!(gap <= 1e-5, "seed {seed}: Jacobian gap {gap:e}");
    }
}

#[test]
fn linearized_residual_vanishes_at_a_solution() {
    // After a converged solve, A(x) x - b(x) is the physical mismatch.
    let mut solved = 0;
    for seed in 0..6 {
        let (mut case, _) = case_circuit(seed);
        case.controls = Default::default();
        let net = case.network.clone();
        let Ok((sol, _)) = tdflow::nrsolve::solve_direct(&net, &tdflow::nrsolve::SolverOptions {
            q_limits: false,
            ..Default::default()
        }) else {
            continue;
        };
        let circuit = Circuit::new(net.clone()).unwrap();
        let oracle = mismatch_oracle(&net, circuit.index(), &sol.x, &Default::default(), 0.0, 1e3, true);
        assert!(oracle.iter().all(|v| v.abs() <= 1e-6), "seed {seed}");
        solved += 1;
    }
    assert!(solved >= 3, "only {solved} random cases solved");
}

fn close(a: C64, b: C64) -> bool {
    (a - b).norm() <= 1e-12
}

fn random_triple(k: u64) -> [C64; 3] {
    let t = k as f64;
    [
        C64::new((1.3 * t).sin(), (0.7 * t).cos()),
        C64::new((2.1 * t).cos(), (0.4 * t + 1.0).sin()),
        C64::new((0.9 * t + 2.0).sin(), (1.7 * t).cos()),
    ]
}

#[test]
fn sequence_components_round_trip_through_the_transform() {
    let to_phase = sequence_to_phase();
    let to_seq = phase_to_sequence();
    for k in 0..50 {
        let x = random_triple(k);
        let seq = sequence_components(x);
        for s in 0..3 {
            let expect: C64 = (0..3).map(|p| to_seq[(s, p)] * x[p]).sum();
            assert!(close(seq[s], expect), "component {s}");
        }
        for p in 0..3 {
            let back: C64 = (0..3).map(|s| to_phase[(p, s)] * seq[s]).sum();
            assert!(close(back, x[p]));
        }
    }
}

#[test]
fn balanced_currents_are_pure_positive_sequence() {
    let a = fortescue_a();
    for k in 0..20 {
        let i = random_triple(k)[0];
        let seq = sequence_components([i, a * a * i, a * i]);
        assert!(close(seq[0], C64::new(0.0, 0.0)));
        assert!(close(seq[1], i));
        assert!(close(seq[2], C64::new(0.0, 0.0)));
    }
}

#[test]
fn zero_sequence_currents_inject_nothing_at_the_port() {
    let net = {
        let mut n = random_case(0).network;
        n.head_sources.clear();
        if n.ports.is_empty() {
            n.ports.push(tdflow::netmodel::CouplingPort {
                name: "p".into(),
                transmission_bus: BusId(2),
                feeder_head: BusId(100),
            });
        }
        n
    };
    let circuit = Circuit::new(net.clone()).unwrap();
    let port = &net.ports[0];
    let st = circuit.stamp_coupling_port(port).unwrap();
    let (vr, vi) = circuit.index().voltage_pair(port.transmission_bus, Phase::P).unwrap();
    for k in 0..10 {
        let i0 = random_triple(k)[1];
        assert!(close(positive_sequence_current([i0; 3]), C64::new(0.0, 0.0)));
        let mut x = vec![0.0; circuit.dim()];
        for p in Phase::ABC {
            let (r, i) = circuit.index().head_current_pair(port.feeder_head, p).unwrap();
            x[r] = i0.re;
            x[i] = i0.im;
        }
        let f = st.residual(&x);
        assert!(f[vr].abs() <= 1e-12 && f[vi].abs() <= 1e-12);
    }
}

#[test]
fn port_voltages_follow_the_balanced_phase_pattern() {
    let to_phase = sequence_to_phase();
    for k in 0..20 {
        let vp = random_triple(k)[2];
        let v = port_phase_voltages(vp);
        for p in 0..3 {
            assert!(close(v[p], to_phase[(p, 1)] * vp));
        }
        let rel = |z: C64| (z / vp).arg().to_degrees();
        assert!(rel(v[0]).abs() <= 1e-12);
        assert!((rel(v[1]) + 120.0).abs() <= 1e-10);
        assert!((rel(v[2]) - 120.0).abs() <= 1e-10);
    }
}

#[test]
fn real_port_matrix_matches_complex_transform() {
    let to_seq = phase_to_sequence();
    let m = port_current_matrix();
    for s in 0..3 {
        for p in 0..3 {
            let z = to_seq[(s, p)];
            let block = [[z.re, -z.im], [z.im, z.re]];
            for r in 0..2 {
                for col in 0..2 {
                    assert!((m[2 * s + r][2 * p + col] - block[r][col]).abs() <= 1e-12);
                }
            }
        }
    }
}
