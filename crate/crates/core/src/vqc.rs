//! Variational-quantum-circuit Q-function.
//!
//! Six features are angle-encoded with Rx rotations onto six qubits, pushed
//! through L layers of per-qubit Ry/Rz rotations followed by a CNOT ladder,
//! and read out as weighted Pauli-Z expectations - one trainable weight
//! vector per action. Rotation-angle gradients use the parameter-shift rule
//! (exact for these generators); observable-weight gradients are analytic.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{expectation_weighted_z, zero_state, Axis, StateVector, WeightedZObservable};

/// Circuit width is fixed: one qubit per GENCO, one feature per qubit.
pub const N_QUBITS: usize = 6;

/// Shape and normalization description of the circuit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqcConfig {
    pub n_layers: usize,
    pub n_actions: usize,
    /// Per-feature (min, max) used to map raw features onto [0, pi].
    pub feature_ranges: Vec<(f64, f64)>,
    /// One shared angle per (layer, qubit) driving both Ry and Rz when true.
    pub tie_ry_rz: bool,
}

impl VqcConfig {
    pub fn new(n_layers: usize, n_actions: usize) -> Self {
        VqcConfig {
            n_layers,
            n_actions,
            feature_ranges: vec![(0.0, 1.0); N_QUBITS],
            tie_ry_rz: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_actions < 2 {
            return Err(Error::ShapeMismatch(format!(
                "n_actions must be >= 2, got {}",
                self.n_actions
            )));
        }
        if self.feature_ranges.len() != N_QUBITS {
            return Err(Error::ShapeMismatch(format!(
                "need {N_QUBITS} feature ranges, got {}",
                self.feature_ranges.len()
            )));
        }
        for (i, (lo, hi)) in self.feature_ranges.iter().enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::ShapeMismatch(format!(
                    "feature range {i} must satisfy min < max, got ({lo}, {hi})"
                )));
            }
        }
        Ok(())
    }

    fn angles_per_layer(&self) -> usize {
        if self.tie_ry_rz {
            N_QUBITS
        } else {
            2 * N_QUBITS
        }
    }
}

/// Feature vector mapped onto rotation angles in [0, pi].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncodedState {
    pub angles: [f64; N_QUBITS],
}

/// Min-max normalizes six raw features onto [0, pi], clamping at the bounds.
pub fn encode(features: &[f64], config: &VqcConfig) -> Result<EncodedState> {
    if features.len() != N_QUBITS {
        return Err(Error::ShapeMismatch(format!(
            "expected {N_QUBITS} features, got {}",
            features.len()
        )));
    }
    let mut angles = [0.0; N_QUBITS];
    for (i, (feature, (lo, hi))) in features.iter().zip(&config.feature_ranges).enumerate() {
        if !feature.is_finite() {
            return Err(Error::NonFiniteFeature { index: i });
        }
        let t = ((feature - lo) / (hi - lo)).clamp(0.0, 1.0);
        angles[i] = t * std::f64::consts::PI;
    }
    Ok(EncodedState { angles })
}

/// Variational angles plus trainable observable weights.
///
/// `angles[l]` holds layer l: 6 shared angles when tied, otherwise 12 as
/// `[ry_0..ry_5, rz_0..rz_5]`. `observable_weights[a]` holds the 6 Pauli-Z
/// weights of action a.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqcParams {
    pub angles: Vec<Vec<f64>>,
    pub observable_weights: Vec<Vec<f64>>,
}

impl VqcParams {
    /// Seeded init: angles uniform in [-pi, pi), weights uniform in
    /// [-1/sqrt(6), +1/sqrt(6)) to mirror the classical fan-in scheme.
    pub fn init<R: Rng>(config: &VqcConfig, rng: &mut R) -> Self {
        let per_layer = config.angles_per_layer();
        let angles = (0..config.n_layers)
            .map(|_| {
                (0..per_layer)
                    .map(|_| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
                    .collect()
            })
            .collect();
        let bound = 1.0 / (N_QUBITS as f64).sqrt();
        let observable_weights = (0..config.n_actions)
            .map(|_| (0..N_QUBITS).map(|_| rng.gen_range(-bound..bound)).collect())
            .collect();
        VqcParams { angles, observable_weights }
    }

    pub fn validate(&self, config: &VqcConfig) -> Result<()> {
        if self.angles.len() != config.n_layers {
            return Err(Error::ShapeMismatch(format!(
                "expected {} angle layers, got {}",
                config.n_layers,
                self.angles.len()
            )));
        }
        let per_layer = config.angles_per_layer();
        for (l, layer) in self.angles.iter().enumerate() {
            if layer.len() != per_layer {
                return Err(Error::ShapeMismatch(format!(
                    "layer {l} has {} angles, expected {per_layer}",
                    layer.len()
                )));
            }
            if layer.iter().any(|a| !a.is_finite()) {
                return Err(Error::ShapeMismatch(format!("layer {l} has non-finite angles")));
            }
        }
        if self.observable_weights.len() != config.n_actions {
            return Err(Error::ShapeMismatch(format!(
                "expected {} observable rows, got {}",
                config.n_actions,
                self.observable_weights.len()
            )));
        }
        for (a, row) in self.observable_weights.iter().enumerate() {
            if row.len() != N_QUBITS {
                return Err(Error::ShapeMismatch(format!(
                    "observable row {a} has {} weights, expected {N_QUBITS}",
                    row.len()
                )));
            }
            if row.iter().any(|w| !w.is_finite()) {
                return Err(Error::ShapeMismatch(format!("observable row {a} has non-finite weights")));
            }
        }
        Ok(())
    }

    fn ry_angle(&self, layer: usize, qubit: usize) -> f64 {
        self.angles[layer][qubit]
    }

    fn rz_angle(&self, config: &VqcConfig, layer: usize, qubit: usize) -> f64 {
        if config.tie_ry_rz {
            self.angles[layer][qubit]
        } else {
            self.angles[layer][N_QUBITS + qubit]
        }
    }
}

/// Gradient with the same shape as `VqcParams`.
#[derive(Debug, Clone, PartialEq)]
pub struct VqcGradient {
    pub angles: Vec<Vec<f64>>,
    pub observable_weights: Vec<Vec<f64>>,
}

impl VqcGradient {
    pub fn add_assign(&mut self, other: &VqcGradient) {
        for (a, b) in self.angles.iter_mut().zip(&other.angles) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.observable_weights.iter_mut().zip(&other.observable_weights) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for row in self.angles.iter_mut().chain(self.observable_weights.iter_mut()) {
            for x in row.iter_mut() {
                *x *= factor;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RotationRole {
    Ry,
    Rz,
}

#[derive(Debug, Clone, Copy)]
struct AngleShift {
    layer: usize,
    qubit: usize,
    role: RotationRole,
    delta: f64,
}

/// Runs the full circuit, optionally with one rotation angle shifted.
fn run_circuit(
    encoded: &EncodedState,
    params: &VqcParams,
    config: &VqcConfig,
    shift: Option<AngleShift>,
) -> StateVector {
    let mut state = zero_state(N_QUBITS).expect("N_QUBITS within range");
    for (qubit, angle) in encoded.angles.iter().enumerate() {
        state = state
            .apply_rotation(Axis::X, qubit, *angle)
            .expect("qubit index within range");
    }
    for layer in 0..config.n_layers {
        for qubit in 0..N_QUBITS {
            let mut ry = params.ry_angle(layer, qubit);
            let mut rz = params.rz_angle(config, layer, qubit);
            if let Some(s) = shift {
                if s.layer == layer && s.qubit == qubit {
                    match s.role {
                        RotationRole::Ry => ry += s.delta,
                        RotationRole::Rz => rz += s.delta,
                    }
                }
            }
            state = state
                .apply_rotation(Axis::Y, qubit, ry)
                .and_then(|s| s.apply_rotation(Axis::Z, qubit, rz))
                .expect("qubit index within range");
        }
        state = state.apply_entangler().expect("N_QUBITS >= 2");
    }
    state
}

fn q_from_state(state: &StateVector, weights: &[Vec<f64>]) -> Vec<f64> {
    let z = state.z_expectations();
    weights
        .iter()
        .map(|row| row.iter().zip(&z).map(|(w, zq)| w * zq).sum())
        .collect()
}

/// Q-values for every action on an encoded state.
pub fn forward(encoded: &EncodedState, params: &VqcParams, config: &VqcConfig) -> Result<Vec<f64>> {
    params.validate(config)?;
    let state = run_circuit(encoded, params, config, None);
    Ok(q_from_state(&state, &params.observable_weights))
}

/// Expectation of one action's observable on a (possibly shifted) circuit.
fn action_expectation(
    encoded: &EncodedState,
    params: &VqcParams,
    config: &VqcConfig,
    action: usize,
    shift: Option<AngleShift>,
) -> f64 {
    let state = run_circuit(encoded, params, config, shift);
    let obs = WeightedZObservable { weights: params.observable_weights[action].clone() };
    expectation_weighted_z(&state, &obs).expect("observable length fixed at N_QUBITS")
}

/// Gradient of the half-squared-residual loss for one (state, action) pair.
///
/// Angle gradients chain -residual with the parameter-shift derivative
/// (<O>(w + pi/2) - <O>(w - pi/2)) / 2 per rotation gate; a tied angle drives
/// two gates, so its derivative is the sum of both per-gate shift terms.
/// Observable-weight gradients are -residual * <sigma_z^(i)> on the taken
/// action's row, zero elsewhere.
pub fn grad(
    encoded: &EncodedState,
    params: &VqcParams,
    config: &VqcConfig,
    action: usize,
    residual: f64,
) -> Result<VqcGradient> {
    params.validate(config)?;
    if action >= config.n_actions {
        return Err(Error::ShapeMismatch(format!(
            "action {action} out of range for {} actions",
            config.n_actions
        )));
    }

    const SHIFT: f64 = std::f64::consts::FRAC_PI_2;
    let shift_term = |layer: usize, qubit: usize, role: RotationRole| -> f64 {
        let plus = action_expectation(
            encoded,
            params,
            config,
            action,
            Some(AngleShift { layer, qubit, role, delta: SHIFT }),
        );
        let minus = action_expectation(
            encoded,
            params,
            config,
            action,
            Some(AngleShift { layer, qubit, role, delta: -SHIFT }),
        );
        (plus - minus) / 2.0
    };

    let mut angles = Vec::with_capacity(config.n_layers);
    for layer in 0..config.n_layers {
        let mut layer_grad = vec![0.0; config.angles_per_layer()];
        for qubit in 0..N_QUBITS {
            if config.tie_ry_rz {
                let d = shift_term(layer, qubit, RotationRole::Ry)
                    + shift_term(layer, qubit, RotationRole::Rz);
                layer_grad[qubit] = -residual * d;
            } else {
                layer_grad[qubit] = -residual * shift_term(layer, qubit, RotationRole::Ry);
                layer_grad[N_QUBITS + qubit] = -residual * shift_term(layer, qubit, RotationRole::Rz);
            }
        }
        angles.push(layer_grad);
    }

    let z = run_circuit(encoded, params, config, None).z_expectations();
    let mut observable_weights = vec![vec![0.0; N_QUBITS]; config.n_actions];
    for (g, zq) in observable_weights[action].iter_mut().zip(&z) {
        *g = -residual * zq;
    }

    Ok(VqcGradient { angles, observable_weights })
}

/// params <- params - alpha * gradient, elementwise.
pub fn apply_update(params: &mut VqcParams, gradient: &VqcGradient, alpha: f64) {
    for (layer, glayer) in params.angles.iter_mut().zip(&gradient.angles) {
        for (a, g) in layer.iter_mut().zip(glayer) {
            *a -= alpha * g;
        }
    }
    for (row, grow) in params.observable_weights.iter_mut().zip(&gradient.observable_weights) {
        for (w, g) in row.iter_mut().zip(grow) {
            *w -= alpha * g;
        }
    }
}

/// Convenience bundle used by the DQN layer: config + params with a
/// feature-vector interface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqcQFunction {
    pub config: VqcConfig,
    pub params: VqcParams,
}

impl VqcQFunction {
    pub fn init<R: Rng>(config: VqcConfig, rng: &mut R) -> Self {
        let params = VqcParams::init(&config, rng);
        VqcQFunction { config, params }
    }

    pub fn n_actions(&self) -> usize {
        self.config.n_actions
    }

    pub fn forward(&self, features: &[f64]) -> Result<Vec<f64>> {
        let encoded = encode(features, &self.config)?;
        forward(&encoded, &self.params, &self.config)
    }

    pub fn grad(&self, features: &[f64], action: usize, residual: f64) -> Result<VqcGradient> {
        let encoded = encode(features, &self.config)?;
        grad(&encoded, &self.params, &self.config, action, residual)
    }

    pub fn apply_update(&mut self, gradient: &VqcGradient, alpha: f64) {
        apply_update(&mut self.params, gradient, alpha);
    }
}
