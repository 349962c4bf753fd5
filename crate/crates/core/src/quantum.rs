//! Exact statevector simulation for small qubit registers.
//!
//! Qubit 0 is the least-significant bit of the basis index, so for a 2-qubit
//! register the amplitude order is |00>, |01> (qubit 0 set), |10>, |11>.
//! Operations take the state by value and return it; amplitudes are updated
//! in place internally.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const MAX_QUBITS: usize = 12;

/// Axis of a single-qubit rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// 2^n complex amplitudes of an n-qubit register.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

/// |0...0> on `n` qubits.
pub fn zero_state(n: usize) -> Result<StateVector> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::QubitCountOutOfRange(n));
    }
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n];
    amplitudes[0] = Complex64::new(1.0, 0.0);
    Ok(StateVector { n_qubits: n, amplitudes })
}

impl StateVector {
    /// Builds a state from raw amplitudes; length must be a power of two
    /// matching `n_qubits` and the norm must already be 1.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if !len.is_power_of_two() || len < 2 {
            return Err(Error::ShapeMismatch(format!("amplitude count {len} is not a power of two")));
        }
        let n_qubits = len.trailing_zeros() as usize;
        if n_qubits > MAX_QUBITS {
            return Err(Error::QubitCountOutOfRange(n_qubits));
        }
        Ok(StateVector { n_qubits, amplitudes })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    fn check_qubit(&self, index: usize) -> Result<()> {
        if index >= self.n_qubits {
            return Err(Error::QubitIndexOutOfRange { index, n_qubits: self.n_qubits });
        }
        Ok(())
    }

    /// Applies the 2x2 unitary [[m00, m01], [m10, m11]] on one qubit.
    fn apply_single(mut self, qubit: usize, m: [Complex64; 4]) -> Self {
        let mask = 1usize << qubit;
        let dim = self.amplitudes.len();
        let mut base = 0usize;
        while base < dim {
            // Visit each (bit=0, bit=1) amplitude pair exactly once.
            for offset in 0..mask {
                let i0 = base + offset;
                let i1 = i0 | mask;
                let a0 = self.amplitudes[i0];
                let a1 = self.amplitudes[i1];
                self.amplitudes[i0] = m[0] * a0 + m[1] * a1;
                self.amplitudes[i1] = m[2] * a0 + m[3] * a1;
            }
            base += mask << 1;
        }
        self
    }

    /// Rx / Ry / Rz on `qubit` by `angle` radians.
    pub fn apply_rotation(self, axis: Axis, qubit: usize, angle: f64) -> Result<Self> {
        self.check_qubit(qubit)?;
        let (c, s) = ((angle / 2.0).cos(), (angle / 2.0).sin());
        let m = match axis {
            Axis::X => [
                Complex64::new(c, 0.0),
                Complex64::new(0.0, -s),
                Complex64::new(0.0, -s),
                Complex64::new(c, 0.0),
            ],
            Axis::Y => [
                Complex64::new(c, 0.0),
                Complex64::new(-s, 0.0),
                Complex64::new(s, 0.0),
                Complex64::new(c, 0.0),
            ],
            Axis::Z => [
                Complex64::new(c, -s),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(c, s),
            ],
        };
        Ok(self.apply_single(qubit, m))
    }

    /// CNOT: flips `target` wherever `control` is set.
    pub fn apply_cnot(mut self, control: usize, target: usize) -> Result<Self> {
        self.check_qubit(control)?;
        self.check_qubit(target)?;
        if control == target {
            return Err(Error::CnotEqualIndices(control));
        }
        let cmask = 1usize << control;
        let tmask = 1usize << target;
        for i in 0..self.amplitudes.len() {
            if i & cmask != 0 && i & tmask == 0 {
                self.amplitudes.swap(i, i | tmask);
            }
        }
        Ok(self)
    }

    /// Ladder entangler: CNOT(0,1), CNOT(1,2), ..., CNOT(n-2, n-1).
    pub fn apply_entangler(mut self) -> Result<Self> {
        if self.n_qubits < 2 {
            return Err(Error::EntanglerTooSmall(self.n_qubits));
        }
        for i in 0..self.n_qubits - 1 {
            self = self.apply_cnot(i, i + 1)?;
        }
        Ok(self)
    }

    /// Per-qubit <sigma_z> values: +1 weight for bit 0, -1 for bit 1.
    pub fn z_expectations(&self) -> Vec<f64> {
        let mut z = vec![0.0; self.n_qubits];
        for (index, amp) in self.amplitudes.iter().enumerate() {
            let p = amp.norm_sqr();
            if p == 0.0 {
                continue;
            }
            for (qubit, zq) in z.iter_mut().enumerate() {
                if index & (1 << qubit) == 0 {
                    *zq += p;
                } else {
                    *zq -= p;
                }
            }
        }
        z
    }
}

/// Weighted sum of Pauli-Z operators, one weight per qubit.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedZObservable {
    pub weights: Vec<f64>,
}

/// <psi| sum_i w_i sigma_z^(i) |psi>.
pub fn expectation_weighted_z(state: &StateVector, obs: &WeightedZObservable) -> Result<f64> {
    if obs.weights.len() != state.n_qubits() {
        return Err(Error::ObservableLengthMismatch {
            got: obs.weights.len(),
            expected: state.n_qubits(),
        });
    }
    let z = state.z_expectations();
    Ok(obs.weights.iter().zip(&z).map(|(w, zq)| w * zq).sum())
}
