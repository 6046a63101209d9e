//! JSON wire types of the job service: requests, job summaries and the
//! stateless compute endpoints. Kept dependency-light so every component
//! can share them.

use std::path::PathBuf;

use exosquat_core::actuation::PdConfig;
use exosquat_core::contact::{CoPEstimate, ContactParams, SensorForceSet, StableRegion};
use exosquat_core::env::reward::{RewardBreakdown, RewardConfig};
use exosquat_core::runner::Progress;
use exosquat_core::RunConfig;
use serde::{Deserialize, Serialize};

pub const API_PREFIX: &str = "/api/v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    Train,
    Eval,
    Sweep,
    Check,
}

/// Which controller an eval or sweep job drives.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ControllerSpec {
    #[default]
    Playback,
    Checkpoint {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JobRequest {
    pub kind: JobKind,
    pub config: RunConfig,
    #[serde(default)]
    pub controller: ControllerSpec,
    /// Output directory; allocated under the service's output root when
    /// absent.
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Optional label shown in listings.
    #[serde(default)]
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Queued,
    Running,
    Finished,
    Failed,
    Cancelled,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JobSummary {
    pub id: u64,
    pub kind: JobKind,
    pub label: String,
    pub status: JobStatus,
    pub progress: Option<Progress>,
    pub out_dir: PathBuf,
    pub error: Option<String>,
    /// Job-kind-specific result document (train/eval/sweep summaries or
    /// the check report).
    pub result: Option<serde_json::Value>,
    pub created_unix: u64,
    pub finished_unix: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubmitResponse {
    pub id: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArtifactList {
    pub out_dir: PathBuf,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub version: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorResponse {
    pub error: String,
}

// Stateless compute payloads.

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CopRequest {
    pub forces: SensorForceSet,
    #[serde(default)]
    pub params: Option<ContactParams>,
    #[serde(default)]
    pub region: Option<StableRegion>,
}

pub type CopResponse = CoPEstimate;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PdTorqueRequest {
    #[serde(default)]
    pub config: Option<PdConfig>,
    pub target: Vec<f64>,
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PdTorqueResponse {
    pub torque: Vec<f64>,
}

/// Reward evaluation with plain-array poses; quaternions are `(w, x, y, z)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RewardRequest {
    #[serde(default)]
    pub config: Option<RewardConfig>,
    pub target_joints: [f64; 8],
    pub target_joint_vels: [f64; 8],
    pub target_root_pos: [f64; 3],
    pub target_root_quat: [f64; 4],
    pub target_com: [f64; 3],
    pub target_ee_left: [f64; 3],
    pub target_ee_right: [f64; 3],
    pub joints: [f64; 8],
    pub joint_vels: [f64; 8],
    pub root_pos: [f64; 3],
    pub root_quat: [f64; 4],
    pub com: [f64; 3],
    pub ee_left: [f64; 3],
    pub ee_right: [f64; 3],
    pub cops: CoPEstimate,
    pub torques: [f64; 8],
}

pub type RewardResponse = RewardBreakdown;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaeRequest {
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    #[serde(default)]
    pub bootstrap: f64,
    pub gamma: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaeResponse {
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}
