//! Q-function parameter checkpoints: JSON with enough config echoed to
//! validate shapes on load. Both backends share one tagged format.

use serde::{Deserialize, Serialize};

use crate::dqn::QBackend;
use crate::error::{Error, Result};
use crate::mlp::{MlpParams, N_FEATURES};
use crate::vqc::{VqcConfig, VqcQFunction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "snake_case", deny_unknown_fields)]
pub enum Checkpoint {
    Vqc { config: VqcConfig, params: crate::vqc::VqcParams },
    Mlp { params: MlpParams },
}

impl Checkpoint {
    pub fn from_backend(backend: &QBackend) -> Self {
        match backend {
            QBackend::Vqc(q) => Checkpoint::Vqc { config: q.config.clone(), params: q.params.clone() },
            QBackend::Mlp(p) => Checkpoint::Mlp { params: p.clone() },
        }
    }

    pub fn into_backend(self) -> Result<QBackend> {
        self.validate()?;
        Ok(match self {
            Checkpoint::Vqc { config, params } => QBackend::Vqc(VqcQFunction { config, params }),
            Checkpoint::Mlp { params } => QBackend::Mlp(params),
        })
    }

    /// Shape consistency between the echoed config and the parameters.
    pub fn validate(&self) -> Result<()> {
        match self {
            Checkpoint::Vqc { config, params } => {
                config.validate()?;
                params.validate(config)
            }
            Checkpoint::Mlp { params } => {
                let layers = &params.net.layers;
                if layers.is_empty() {
                    return Err(Error::ShapeMismatch("checkpoint has no layers".into()));
                }
                if layers[0].input_dim != N_FEATURES {
                    return Err(Error::ShapeMismatch(format!(
                        "first layer expects {} inputs, need {N_FEATURES}",
                        layers[0].input_dim
                    )));
                }
                for (l, layer) in layers.iter().enumerate() {
                    if layer.weights.len() != layer.input_dim * layer.output_dim
                        || layer.bias.len() != layer.output_dim
                    {
                        return Err(Error::ShapeMismatch(format!(
                            "layer {l} weight/bias sizes do not match its declared dims"
                        )));
                    }
                    if layer.weights.iter().chain(&layer.bias).any(|v| !v.is_finite()) {
                        return Err(Error::ShapeMismatch(format!("layer {l} has non-finite values")));
                    }
                    if l + 1 < layers.len() && layers[l + 1].input_dim != layer.output_dim {
                        return Err(Error::ShapeMismatch(format!(
                            "layer {} input dim {} does not chain from layer {l} output dim {}",
                            l + 1,
                            layers[l + 1].input_dim,
                            layer.output_dim
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoints are always serializable")
    }

    /// Parses and shape-validates a checkpoint. Never panics on malformed
    /// input.
    pub fn from_json(json: &str) -> Result<Self> {
        let checkpoint: Checkpoint = serde_json::from_str(json)?;
        checkpoint.validate()?;
        Ok(checkpoint)
    }
}
