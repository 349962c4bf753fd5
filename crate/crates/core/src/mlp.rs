//! Classical baseline Q-function: a small feed-forward network with manual
//! backpropagation, exposing the same forward/grad/update contract as the
//! quantum approximator. Plain SGD, no momentum, mirroring the quantum arm's
//! update rule.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Net, NetGradient};

pub const N_FEATURES: usize = 6;

/// Q-network parameters: 6 inputs -> tanh hidden layers -> linear Q-values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub net: Net,
}

#[derive(Debug, Clone)]
pub struct MlpGradient {
    pub net: NetGradient,
}

impl MlpGradient {
    pub fn add_assign(&mut self, other: &MlpGradient) {
        self.net.add_assign(&other.net);
    }

    pub fn scale(&mut self, factor: f64) {
        self.net.scale(factor);
    }
}

impl MlpParams {
    /// Seeded uniform [-1/sqrt(fan_in), +1/sqrt(fan_in)) initialization.
    pub fn init<R: Rng>(hidden: &[usize], n_actions: usize, rng: &mut R) -> Self {
        let mut dims = Vec::with_capacity(hidden.len() + 2);
        dims.push(N_FEATURES);
        dims.extend_from_slice(hidden);
        dims.push(n_actions);
        MlpParams { net: Net::new(&dims, rng) }
    }

    pub fn n_actions(&self) -> usize {
        self.net.output_dim()
    }

    fn check_features(&self, features: &[f64]) -> Result<()> {
        if features.len() != N_FEATURES {
            return Err(Error::ShapeMismatch(format!(
                "expected {N_FEATURES} features, got {}",
                features.len()
            )));
        }
        Ok(())
    }

    /// Q-values for every action.
    pub fn forward(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.check_features(features)?;
        Ok(self.net.forward(features))
    }

    /// Gradient of the half-squared-residual loss, backpropagated through the
    /// taken action's output only.
    pub fn grad(&self, features: &[f64], action: usize, residual: f64) -> Result<MlpGradient> {
        self.check_features(features)?;
        if action >= self.n_actions() {
            return Err(Error::ShapeMismatch(format!(
                "action {action} out of range for {} actions",
                self.n_actions()
            )));
        }
        let trace = self.net.forward_trace(features);
        let mut output_grad = vec![0.0; self.n_actions()];
        output_grad[action] = -residual;
        let (net, _) = self.net.backward(&trace, &output_grad);
        Ok(MlpGradient { net })
    }

    /// params <- params - alpha * gradient.
    pub fn apply_update(&mut self, gradient: &MlpGradient, alpha: f64) {
        self.net.apply_update(&gradient.net, alpha);
    }
}
