//! Independent-oracle checks: the statevector kernel and the quantum
//! Q-function against brute-force dense-matrix simulation.

mod common;

use common::{circuit_matrix, matvec, weighted_z_expectation, GateOp, ToyMdp};
use num_complex::Complex64;
use qmarket_core::quantum::{expectation_weighted_z, zero_state, Axis, StateVector, WeightedZObservable};
use qmarket_core::vqc::{encode, forward, VqcConfig, VqcParams, N_QUBITS};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_circuit<R: Rng>(n: usize, len: usize, rng: &mut R) -> Vec<GateOp> {
    (0..len)
        .map(|_| {
            if n >= 2 && rng.gen_bool(0.3) {
                let control = rng.gen_range(0..n);
                let mut target = rng.gen_range(0..n);
                while target == control {
                    target = rng.gen_range(0..n);
                }
                GateOp::Cnot(control, target)
            } else {
                let axis = match rng.gen_range(0..3) {
                    0 => Axis::X,
                    1 => Axis::Y,
                    _ => Axis::Z,
                };
                GateOp::Rotate(axis, rng.gen_range(0..n), rng.gen_range(-6.3..6.3))
            }
        })
        .collect()
}

fn apply_gates(state: StateVector, gates: &[GateOp]) -> StateVector {
    let mut state = state;
    for gate in gates {
        state = match gate {
            GateOp::Rotate(axis, qubit, angle) => state.apply_rotation(*axis, *qubit, *angle).unwrap(),
            GateOp::Cnot(control, target) => state.apply_cnot(*control, *target).unwrap(),
        };
    }
    state
}

#[test]
fn kernel_matches_dense_matrices_up_to_three_qubits() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for n in 1..=3usize {
        for _ in 0..80 {
            let gates = random_circuit(n, 25, &mut rng);
            let fast = apply_gates(zero_state(n).unwrap(), &gates);
            let dense = matvec(&circuit_matrix(n, &gates), zero_state(n).unwrap().amplitudes());
            for (a, b) in fast.amplitudes().iter().zip(&dense) {
                assert!((a - b).norm() < 1e-10, "n={n}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn expectation_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for _ in 0..40 {
        let gates = random_circuit(3, 20, &mut rng);
        let state = apply_gates(zero_state(3).unwrap(), &gates);
        let weights: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let fast = expectation_weighted_z(&state, &WeightedZObservable { weights: weights.clone() })
            .unwrap();
        let dense = weighted_z_expectation(state.amplitudes(), &weights);
        assert!((fast - dense).abs() < 1e-10);
    }
}

#[test]
fn bell_state_via_dense_oracle() {
    // H is not in the gate set; Ry(pi/2) then CNOT entangles just as well.
    let gates = [GateOp::Rotate(Axis::Y, 0, std::f64::consts::FRAC_PI_2), GateOp::Cnot(0, 1)];
    let fast = apply_gates(zero_state(2).unwrap(), &gates);
    let dense = matvec(&circuit_matrix(2, &gates), zero_state(2).unwrap().amplitudes());
    for (a, b) in fast.amplitudes().iter().zip(&dense) {
        assert!((a - b).norm() < 1e-12);
    }
    // Equal weight on both qubits cancels on a Bell pair.
    let e = expectation_weighted_z(&fast, &WeightedZObservable { weights: vec![1.0, 1.0] }).unwrap();
    assert!(e.abs() < 1e-12);
}

/// Builds the full Q-function circuit as explicit dense 64x64 matrices.
fn dense_vqc_q_values(features: &[f64], params: &VqcParams, config: &VqcConfig) -> Vec<f64> {
    let encoded = encode(features, config).unwrap();
    let mut gates: Vec<GateOp> = encoded
        .angles
        .iter()
        .enumerate()
        .map(|(q, angle)| GateOp::Rotate(Axis::X, q, *angle))
        .collect();
    for layer in 0..config.n_layers {
        for q in 0..N_QUBITS {
            let ry = params.angles[layer][q];
            let rz = if config.tie_ry_rz { params.angles[layer][q] } else { params.angles[layer][N_QUBITS + q] };
            gates.push(GateOp::Rotate(Axis::Y, q, ry));
            gates.push(GateOp::Rotate(Axis::Z, q, rz));
        }
        for q in 0..N_QUBITS - 1 {
            gates.push(GateOp::Cnot(q, q + 1));
        }
    }
    let zero: Vec<Complex64> = zero_state(N_QUBITS).unwrap().amplitudes().to_vec();
    let amplitudes = matvec(&circuit_matrix(N_QUBITS, &gates), &zero);
    params
        .observable_weights
        .iter()
        .map(|row| weighted_z_expectation(&amplitudes, row))
        .collect()
}

#[test]
fn vqc_forward_matches_dense_matrix_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for tie in [true, false] {
        let config = VqcConfig { tie_ry_rz: tie, ..VqcConfig::new(2, 4) };
        for _ in 0..10 {
            let params = VqcParams::init(&config, &mut rng);
            let features: Vec<f64> = (0..N_QUBITS).map(|_| rng.gen_range(0.0..1.0)).collect();
            let encoded = encode(&features, &config).unwrap();
            let fast = forward(&encoded, &params, &config).unwrap();
            let dense = dense_vqc_q_values(&features, &params, &config);
            for (a, b) in fast.iter().zip(&dense) {
                assert!((a - b).abs() < 1e-10, "tie={tie}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn value_iteration_oracle_selects_staying_policy() {
    let mdp = ToyMdp { gamma: 0.5 };
    let q = mdp.optimal_q();
    // Staying in either state repeats reward 2: Q = 2 / (1 - 0.5) = 4.
    assert!((q[0][0] - 4.0).abs() < 1e-9);
    assert!((q[1][1] - 4.0).abs() < 1e-9);
    assert!((q[0][1] - 2.0).abs() < 1e-9);
    assert!((q[1][0] - 2.0).abs() < 1e-9);
    assert_eq!(mdp.optimal_policy(), [0, 1]);
}
