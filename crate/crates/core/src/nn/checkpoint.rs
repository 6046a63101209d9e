//! Versioned JSON checkpoint carrying the network dimensions, all
//! parameters, the observation normalizer statistics and training
//! metadata. The layout is stable: loaders reject unknown versions instead
//! of guessing.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::normalizer::RunningNorm;
use super::policy::PolicyValueNet;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("format: {0}")]
    Format(#[from] serde_json::Error),
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub samples: u64,
    pub iterations: u64,
    pub seed: u64,
    pub mode: String,
    pub note: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub obs_dim: usize,
    pub act_dim: usize,
    pub hidden: Vec<usize>,
    pub net: PolicyValueNet,
    pub normalizer: RunningNorm,
    pub meta: CheckpointMeta,
}

impl Checkpoint {
    pub fn new(net: PolicyValueNet, normalizer: RunningNorm, meta: CheckpointMeta) -> Self {
        let dims = net.policy.dims().to_vec();
        Self {
            version: CHECKPOINT_VERSION,
            obs_dim: net.obs_dim(),
            act_dim: net.act_dim(),
            hidden: dims[1..dims.len() - 1].to_vec(),
            net,
            normalizer,
            meta,
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, CheckpointError> {
        let ckpt: Checkpoint = serde_json::from_str(text)?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(CheckpointError::Version(ckpt.version));
        }
        Ok(ckpt)
    }
}
