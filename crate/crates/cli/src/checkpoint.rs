use std::path::Path;

use anyhow::{bail, Context, Result};
use cdc_core::policy::{ARCHITECTURE, N_PARAMS};
use cdc_core::PolicyParams;
use serde::{Deserialize, Serialize};

/// Trained network on disk. Floats are written in shortest round-trip form
/// and parsed back exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub architecture: String,
    pub n_params: usize,
    pub seed: u64,
    pub metadata: CheckpointMeta,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub generator: String,
    pub params_sha256: String,
    pub best_epoch: usize,
    pub epochs: usize,
    pub best_val_loss: f64,
}

impl Checkpoint {
    pub fn new(policy: &PolicyParams, seed: u64, metadata: CheckpointMeta) -> Self {
        Self {
            architecture: ARCHITECTURE.to_string(),
            n_params: N_PARAMS,
            seed,
            metadata,
            params: policy.as_flat().to_vec(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).with_context(|| format!("writing checkpoint {}", path.display()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading checkpoint {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing checkpoint {}", path.display()))
    }

    /// The network, after checking it matches the built-in architecture.
    pub fn policy(&self) -> Result<PolicyParams> {
        if self.architecture != ARCHITECTURE {
            bail!(
                "checkpoint architecture \"{}\" does not match \"{ARCHITECTURE}\"",
                self.architecture
            );
        }
        if self.n_params != N_PARAMS || self.params.len() != N_PARAMS {
            bail!(
                "checkpoint has {} parameters (declared {}), architecture needs {N_PARAMS}",
                self.params.len(),
                self.n_params
            );
        }
        Ok(PolicyParams::from_flat(self.params.clone())?)
    }
}
