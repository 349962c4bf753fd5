//! Small dense feed-forward networks with hand-written backpropagation.
//!
//! Shared plumbing for the classical Q-function and the PPO actor/critic.
//! Everything is plain `Vec<f64>`; weights are row-major `[out][in]`.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub input_dim: usize,
    pub output_dim: usize,
    /// Row-major: weights[o * input_dim + i].
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Dense {
    fn forward(&self, input: &[f64]) -> Vec<f64> {
        debug_assert_eq!(input.len(), self.input_dim);
        let mut out = self.bias.clone();
        for (o, out_o) in out.iter_mut().enumerate() {
            let row = &self.weights[o * self.input_dim..(o + 1) * self.input_dim];
            *out_o += row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>();
            if self.activation == Activation::Tanh {
                *out_o = out_o.tanh();
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Net {
    pub layers: Vec<Dense>,
}

/// Gradient with the same shape as a `Net`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetGradient {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

impl NetGradient {
    pub fn add_assign(&mut self, other: &NetGradient) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.bias.iter_mut().zip(&other.bias) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for row in self.weights.iter_mut().chain(self.bias.iter_mut()) {
            for x in row.iter_mut() {
                *x *= factor;
            }
        }
    }
}

/// Per-layer activations recorded during a forward pass; `post[0]` is the
/// network input, `post[l + 1]` the output of layer l.
pub struct ForwardTrace {
    pub post: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &[f64] {
        self.post.last().expect("trace has at least the input")
    }
}

impl Net {
    /// Fully-connected net over `dims` (e.g. [6, 64, 64, 3]): tanh on hidden
    /// layers, linear output. Weights and biases drawn uniformly from
    /// [-1/sqrt(fan_in), +1/sqrt(fan_in)).
    pub fn new<R: Rng>(dims: &[usize], rng: &mut R) -> Self {
        assert!(dims.len() >= 2, "need at least input and output dims");
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for (l, pair) in dims.windows(2).enumerate() {
            let (input_dim, output_dim) = (pair[0], pair[1]);
            let bound = 1.0 / (input_dim as f64).sqrt();
            let weights = (0..input_dim * output_dim)
                .map(|_| rng.gen_range(-bound..bound))
                .collect();
            let bias = (0..output_dim).map(|_| rng.gen_range(-bound..bound)).collect();
            let activation = if l + 2 == dims.len() { Activation::Linear } else { Activation::Tanh };
            layers.push(Dense { input_dim, output_dim, weights, bias, activation });
        }
        Net { layers }
    }

    pub fn zeroed(dims: &[usize]) -> Self {
        assert!(dims.len() >= 2, "need at least input and output dims");
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for (l, pair) in dims.windows(2).enumerate() {
            let (input_dim, output_dim) = (pair[0], pair[1]);
            let activation = if l + 2 == dims.len() { Activation::Linear } else { Activation::Tanh };
            layers.push(Dense {
                input_dim,
                output_dim,
                weights: vec![0.0; input_dim * output_dim],
                bias: vec![0.0; output_dim],
                activation,
            });
        }
        Net { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map(|l| l.input_dim).unwrap_or(0)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.output_dim).unwrap_or(0)
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        let mut x = input.to_vec();
        for layer in &self.layers {
            x = layer.forward(&x);
        }
        x
    }

    pub fn forward_trace(&self, input: &[f64]) -> ForwardTrace {
        let mut post = Vec::with_capacity(self.layers.len() + 1);
        post.push(input.to_vec());
        for layer in &self.layers {
            let next = layer.forward(post.last().expect("nonempty"));
            post.push(next);
        }
        ForwardTrace { post }
    }

    /// Backpropagates `output_grad` (dL/d output) through a recorded forward
    /// pass. Returns the parameter gradient and dL/d input.
    pub fn backward(&self, trace: &ForwardTrace, output_grad: &[f64]) -> (NetGradient, Vec<f64>) {
        let mut grad = self.zero_gradient();
        let mut upstream = output_grad.to_vec();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let input = &trace.post[l];
            let output = &trace.post[l + 1];
            // dL/d pre-activation.
            let mut delta = upstream;
            if layer.activation == Activation::Tanh {
                for (d, y) in delta.iter_mut().zip(output) {
                    *d *= 1.0 - y * y;
                }
            }
            for (o, d) in delta.iter().enumerate() {
                grad.bias[l][o] = *d;
                let row = &mut grad.weights[l][o * layer.input_dim..(o + 1) * layer.input_dim];
                for (g, x) in row.iter_mut().zip(input) {
                    *g = d * x;
                }
            }
            let mut down = vec![0.0; layer.input_dim];
            for (o, d) in delta.iter().enumerate() {
                let row = &layer.weights[o * layer.input_dim..(o + 1) * layer.input_dim];
                for (dx, w) in down.iter_mut().zip(row) {
                    *dx += d * w;
                }
            }
            upstream = down;
        }
        (grad, upstream)
    }

    pub fn zero_gradient(&self) -> NetGradient {
        NetGradient {
            weights: self.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            bias: self.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    /// params <- params - alpha * grad.
    pub fn apply_update(&mut self, grad: &NetGradient, alpha: f64) {
        for (l, layer) in self.layers.iter_mut().enumerate() {
            for (w, g) in layer.weights.iter_mut().zip(&grad.weights[l]) {
                *w -= alpha * g;
            }
            for (b, g) in layer.bias.iter_mut().zip(&grad.bias[l]) {
                *b -= alpha * g;
            }
        }
    }

    /// Flat view of all parameters, used by finite-difference test oracles.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &self.layers {
            out.extend_from_slice(&layer.weights);
            out.extend_from_slice(&layer.bias);
        }
        out
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) {
        let mut cursor = 0;
        for layer in &mut self.layers {
            let w_len = layer.weights.len();
            layer.weights.copy_from_slice(&flat[cursor..cursor + w_len]);
            cursor += w_len;
            let b_len = layer.bias.len();
            layer.bias.copy_from_slice(&flat[cursor..cursor + b_len]);
            cursor += b_len;
        }
        debug_assert_eq!(cursor, flat.len());
    }

    pub fn flat_gradient(grad: &NetGradient) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in grad.weights.iter().zip(&grad.bias) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }
}
