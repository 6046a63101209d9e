//! HTTP handlers: thin JSON shells over the core operations and job store.

use std::sync::atomic::Ordering;
use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::Json;
use exosquat_api::{
    ArtifactList, CopRequest, CopResponse, ErrorResponse, GaeRequest, GaeResponse, HealthResponse,
    JobRequest, JobSummary, PdTorqueRequest, PdTorqueResponse, RewardRequest, RewardResponse,
    SubmitResponse,
};
use exosquat_core::actuation::pd_torque;
use exosquat_core::contact::compute_cop as cop_solve;
use exosquat_core::env::reward::{compute_reward as reward_eval, RewardInputs};
use exosquat_core::reference::RefSample;
use exosquat_core::RunConfig;
use nalgebra_glue::{quat_from_wxyz, vec3};

use crate::jobs::ServiceState;

/// Small conversions between wire arrays and math types.
mod nalgebra_glue {
    pub fn vec3(v: [f64; 3]) -> nalgebra::Vector3<f64> {
        nalgebra::Vector3::new(v[0], v[1], v[2])
    }

    pub fn quat_from_wxyz(q: [f64; 4]) -> nalgebra::UnitQuaternion<f64> {
        nalgebra::UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(q[0], q[1], q[2], q[3]))
    }
}

type ApiError = (StatusCode, Json<ErrorResponse>);

fn bad_request(msg: impl Into<String>) -> ApiError {
    (StatusCode::BAD_REQUEST, Json(ErrorResponse { error: msg.into() }))
}

fn not_found(id: u64) -> ApiError {
    (StatusCode::NOT_FOUND, Json(ErrorResponse { error: format!("no job {id}") }))
}

pub async fn health() -> Json<HealthResponse> {
    Json(HealthResponse { status: "ok".into(), version: env!("CARGO_PKG_VERSION").into() })
}

pub async fn presets() -> Json<Vec<String>> {
    Json(RunConfig::PRESET_NAMES.iter().map(|s| s.to_string()).collect())
}

pub async fn submit_job(
    State(state): State<Arc<ServiceState>>,
    Json(request): Json<JobRequest>,
) -> Result<(StatusCode, Json<SubmitResponse>), ApiError> {
    request.config.validate().map_err(|e| bad_request(e.to_string()))?;
    let id = state.spawn_job(request);
    Ok((StatusCode::CREATED, Json(SubmitResponse { id })))
}

pub async fn list_jobs(State(state): State<Arc<ServiceState>>) -> Json<Vec<JobSummary>> {
    Json(state.jobs.list())
}

pub async fn job_status(
    State(state): State<Arc<ServiceState>>,
    Path(id): Path<u64>,
) -> Result<Json<JobSummary>, ApiError> {
    state.jobs.get(id).map(|r| Json(r.summary())).ok_or_else(|| not_found(id))
}

pub async fn cancel_job(
    State(state): State<Arc<ServiceState>>,
    Path(id): Path<u64>,
) -> Result<Json<JobSummary>, ApiError> {
    let record = state.jobs.get(id).ok_or_else(|| not_found(id))?;
    record.cancel.store(true, Ordering::Relaxed);
    Ok(Json(record.summary()))
}

pub async fn job_artifacts(
    State(state): State<Arc<ServiceState>>,
    Path(id): Path<u64>,
) -> Result<Json<ArtifactList>, ApiError> {
    let record = state.jobs.get(id).ok_or_else(|| not_found(id))?;
    let mut files = Vec::new();
    collect_files(&record.out_dir, &record.out_dir, &mut files);
    files.sort();
    Ok(Json(ArtifactList { out_dir: record.out_dir.clone(), files }))
}

fn collect_files(root: &std::path::Path, dir: &std::path::Path, out: &mut Vec<String>) {
    let Ok(entries) = std::fs::read_dir(dir) else { return };
    for entry in entries.flatten() {
        let path = entry.path();
        if path.is_dir() {
            collect_files(root, &path, out);
        } else if let Ok(rel) = path.strip_prefix(root) {
            out.push(rel.to_string_lossy().into_owned());
        }
    }
}

pub async fn compute_cop(Json(request): Json<CopRequest>) -> Json<CopResponse> {
    let params = request.params.unwrap_or_default();
    let region = request.region.unwrap_or_default();
    Json(cop_solve(&request.forces, &params, region))
}

pub async fn compute_pd_torque(
    Json(request): Json<PdTorqueRequest>,
) -> Result<Json<PdTorqueResponse>, ApiError> {
    if request.target.len() != request.position.len() || request.target.len() != request.velocity.len()
    {
        return Err(bad_request("target, position and velocity lengths must match"));
    }
    let cfg = request.config.unwrap_or_default();
    Ok(Json(PdTorqueResponse {
        torque: pd_torque(&cfg, &request.target, &request.position, &request.velocity),
    }))
}

pub async fn compute_reward(Json(request): Json<RewardRequest>) -> Json<RewardResponse> {
    let cfg = request.config.unwrap_or_default();
    let target = RefSample {
        joints: request.target_joints,
        joint_vels: request.target_joint_vels,
        root_pos: vec3(request.target_root_pos),
        root_quat: quat_from_wxyz(request.target_root_quat),
        com: vec3(request.target_com),
        ee_left: vec3(request.target_ee_left),
        ee_right: vec3(request.target_ee_right),
    };
    let inputs = RewardInputs {
        joints: &request.joints,
        joint_vels: &request.joint_vels,
        root_pos: vec3(request.root_pos),
        root_quat: quat_from_wxyz(request.root_quat),
        com: vec3(request.com),
        ee_left: vec3(request.ee_left),
        ee_right: vec3(request.ee_right),
        cops: &request.cops,
        torques: &request.torques,
    };
    Json(reward_eval(&cfg, &target, &inputs))
}

pub async fn compute_gae(Json(request): Json<GaeRequest>) -> Result<Json<GaeResponse>, ApiError> {
    let (advantages, returns) = compute_gae_impl(&request).map_err(bad_request)?;
    Ok(Json(GaeResponse { advantages, returns }))
}

fn compute_gae_impl(request: &GaeRequest) -> Result<(Vec<f64>, Vec<f64>), String> {
    exosquat_core::ppo::compute_gae(
        &request.rewards,
        &request.values,
        &request.dones,
        request.bootstrap,
        request.gamma,
        request.lambda,
    )
    .map_err(|e| e.to_string())
}
