//! Shared test oracles, independent of the library's computation paths:
//! dense Kronecker-product matrix simulation, a value-iteration solver for
//! the two-state toy MDP, and small helpers.

#![allow(dead_code)]

use num_complex::Complex64;
use qmarket_core::quantum::Axis;

pub type Matrix = Vec<Vec<Complex64>>;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(dim: usize) -> Matrix {
    let mut m = vec![vec![c(0.0, 0.0); dim]; dim];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = c(1.0, 0.0);
    }
    m
}

/// Kronecker product a (x) b; b indexes the low bits.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ra, ca) = (a.len(), a[0].len());
    let (rb, cb) = (b.len(), b[0].len());
    let mut out = vec![vec![c(0.0, 0.0); ca * cb]; ra * rb];
    for i in 0..ra {
        for j in 0..ca {
            for k in 0..rb {
                for l in 0..cb {
                    out[i * rb + k][j * cb + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    let m = b[0].len();
    let inner = b.len();
    let mut out = vec![vec![c(0.0, 0.0); m]; n];
    for i in 0..n {
        for k in 0..inner {
            let aik = a[i][k];
            for j in 0..m {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

pub fn matvec(m: &Matrix, v: &[Complex64]) -> Vec<Complex64> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, x)| a * x).sum())
        .collect()
}

/// 2x2 rotation gate matrices.
pub fn rotation_2x2(axis: Axis, angle: f64) -> Matrix {
    let (cos, sin) = ((angle / 2.0).cos(), (angle / 2.0).sin());
    match axis {
        Axis::X => vec![
            vec![c(cos, 0.0), c(0.0, -sin)],
            vec![c(0.0, -sin), c(cos, 0.0)],
        ],
        Axis::Y => vec![vec![c(cos, 0.0), c(-sin, 0.0)], vec![c(sin, 0.0), c(cos, 0.0)]],
        Axis::Z => vec![vec![c(cos, -sin), c(0.0, 0.0)], vec![c(0.0, 0.0), c(cos, sin)]],
    }
}

/// Embeds a single-qubit gate on `qubit` (qubit 0 = least-significant bit):
/// I_(2^(n-1-q)) (x) U (x) I_(2^q).
pub fn embed_single(n: usize, qubit: usize, gate: &Matrix) -> Matrix {
    let low = identity(1 << qubit);
    let high = identity(1 << (n - 1 - qubit));
    kron(&high, &kron(gate, &low))
}

/// Dense CNOT as an explicit basis permutation.
pub fn cnot_matrix(n: usize, control: usize, target: usize) -> Matrix {
    let dim = 1 << n;
    let mut m = vec![vec![c(0.0, 0.0); dim]; dim];
    for col in 0..dim {
        let row = if col & (1 << control) != 0 { col ^ (1 << target) } else { col };
        m[row][col] = c(1.0, 0.0);
    }
    m
}

/// Dense ladder entangler CNOT(0,1) ... CNOT(n-2, n-1), applied in order.
pub fn entangler_matrix(n: usize) -> Matrix {
    let mut m = identity(1 << n);
    for i in 0..n - 1 {
        m = matmul(&cnot_matrix(n, i, i + 1), &m);
    }
    m
}

/// <v| diag(sum_i w_i Z_i) |v>.
pub fn weighted_z_expectation(v: &[Complex64], weights: &[f64]) -> f64 {
    let mut total = 0.0;
    for (index, amp) in v.iter().enumerate() {
        let p = amp.norm_sqr();
        for (qubit, w) in weights.iter().enumerate() {
            let sign = if index & (1 << qubit) == 0 { 1.0 } else { -1.0 };
            total += w * sign * p;
        }
    }
    total
}

/// One gate in a random test circuit.
#[derive(Debug, Clone, Copy)]
pub enum GateOp {
    Rotate(Axis, usize, f64),
    Cnot(usize, usize),
}

/// Dense matrix of a whole circuit (gates applied first-to-last).
pub fn circuit_matrix(n: usize, gates: &[GateOp]) -> Matrix {
    let mut m = identity(1 << n);
    for gate in gates {
        let g = match gate {
            GateOp::Rotate(axis, qubit, angle) => embed_single(n, *qubit, &rotation_2x2(*axis, *angle)),
            GateOp::Cnot(control, target) => cnot_matrix(n, *control, *target),
        };
        m = matmul(&g, &m);
    }
    m
}

/// Deterministic two-state, two-action MDP with distinct optimal actions:
/// staying put in state 0 and state 1 pays 2; switching pays 0.
pub struct ToyMdp {
    pub gamma: f64,
}

impl ToyMdp {
    pub fn step(&self, state: usize, action: usize) -> (usize, f64) {
        match (state, action) {
            (0, 0) => (0, 2.0),
            (0, 1) => (1, 0.0),
            (1, 0) => (0, 0.0),
            (1, 1) => (1, 2.0),
            _ => unreachable!("two states, two actions"),
        }
    }

    /// Exact Q* via value iteration.
    pub fn optimal_q(&self) -> [[f64; 2]; 2] {
        let mut q = [[0.0f64; 2]; 2];
        for _ in 0..10_000 {
            let mut next = q;
            for s in 0..2 {
                for a in 0..2 {
                    let (s2, r) = self.step(s, a);
                    next[s][a] = r + self.gamma * q[s2][0].max(q[s2][1]);
                }
            }
            let delta: f64 = (0..2)
                .flat_map(|s| (0..2).map(move |a| (next[s][a] - q[s][a]).abs()))
                .fold(0.0, f64::max);
            q = next;
            if delta < 1e-12 {
                break;
            }
        }
        q
    }

    pub fn optimal_policy(&self) -> [usize; 2] {
        let q = self.optimal_q();
        [
            if q[0][0] >= q[0][1] { 0 } else { 1 },
            if q[1][0] >= q[1][1] { 0 } else { 1 },
        ]
    }

    pub fn features(state: usize) -> [f64; 6] {
        [
            if state == 0 { 1.0 } else { 0.0 },
            if state == 1 { 1.0 } else { 0.0 },
            0.5,
            0.0,
            0.0,
            0.0,
        ]
    }
}
