//! Versioned JSON dump of policy tensors, the training configuration, and
//! caller-defined metadata.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::network::{Dense, Mlp, PolicyParams};
use super::PpoConfig;
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

/// A named tensor with its shape; matrices are stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorDump {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint<M> {
    pub version: u32,
    pub ppo: PpoConfig,
    pub tensors: Vec<TensorDump>,
    pub meta: M,
}

fn dump_mlp(prefix: &str, mlp: &Mlp, out: &mut Vec<TensorDump>) {
    for (k, layer) in mlp.layers.iter().enumerate() {
        let (r, c) = layer.weight.shape();
        out.push(TensorDump {
            name: format!("{prefix}.{k}.weight"),
            shape: vec![r, c],
            data: layer.weight.transpose().as_slice().to_vec(),
        });
        out.push(TensorDump {
            name: format!("{prefix}.{k}.bias"),
            shape: vec![r],
            data: layer.bias.as_slice().to_vec(),
        });
    }
}

impl<M: Serialize + DeserializeOwned> Checkpoint<M> {
    pub fn new(params: &PolicyParams, ppo: &PpoConfig, meta: M) -> Self {
        let mut tensors = Vec::new();
        dump_mlp("actor", &params.actor, &mut tensors);
        tensors.push(TensorDump {
            name: "log_std".into(),
            shape: vec![params.log_std.len()],
            data: params.log_std.as_slice().to_vec(),
        });
        dump_mlp("critic", &params.critic, &mut tensors);
        Self {
            version: CHECKPOINT_VERSION,
            ppo: ppo.clone(),
            tensors,
            meta,
        }
    }

    fn tensor(&self, name: &str) -> Option<&TensorDump> {
        self.tensors.iter().find(|t| t.name == name)
    }

    fn load_mlp(&self, prefix: &str) -> Result<Mlp> {
        let mut layers = Vec::new();
        for k in 0.. {
            let Some(w) = self.tensor(&format!("{prefix}.{k}.weight")) else {
                break;
            };
            let b = self
                .tensor(&format!("{prefix}.{k}.bias"))
                .ok_or_else(|| Error::Checkpoint(format!("missing {prefix}.{k}.bias")))?;
            let [r, c] = w.shape[..] else {
                return Err(Error::Checkpoint(format!("{} must be 2-D", w.name)));
            };
            if w.data.len() != r * c || b.shape != [r] || b.data.len() != r {
                return Err(Error::Checkpoint(format!("inconsistent shapes in {prefix} layer {k}")));
            }
            if let Some(prev) = layers.last().map(|l: &Dense| l.weight.nrows()) {
                if prev != c {
                    return Err(Error::Checkpoint(format!("{prefix} layer {k} expects {c} inputs, previous layer gives {prev}")));
                }
            }
            layers.push(Dense {
                weight: DMatrix::from_row_slice(r, c, &w.data),
                bias: DVector::from_row_slice(&b.data),
            });
        }
        if layers.is_empty() {
            return Err(Error::Checkpoint(format!("no {prefix} layers")));
        }
        Ok(Mlp { layers })
    }

    pub fn params(&self) -> Result<PolicyParams> {
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                self.version
            )));
        }
        let actor = self.load_mlp("actor")?;
        let critic = self.load_mlp("critic")?;
        let ls = self.tensor("log_std").ok_or_else(|| Error::Checkpoint("missing log_std".into()))?;
        if ls.data.len() != actor.outputs() || critic.outputs() != 1 || critic.inputs() != actor.inputs() {
            return Err(Error::Checkpoint("actor, critic and log_std disagree in shape".into()));
        }
        let params = PolicyParams {
            actor,
            log_std: DVector::from_row_slice(&ls.data),
            critic,
        };
        if !params.is_finite() {
            return Err(Error::Checkpoint("checkpoint holds non-finite parameters".into()));
        }
        Ok(params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))
    }
}
