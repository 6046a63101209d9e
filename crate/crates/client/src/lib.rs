//! Thin async HTTP client for the exosquat job service.

use std::time::Duration;

use exosquat_api::{
    ArtifactList, CopRequest, CopResponse, GaeRequest, GaeResponse, HealthResponse, JobRequest,
    JobStatus, JobSummary, PdTorqueRequest, PdTorqueResponse, RewardRequest, RewardResponse,
    SubmitResponse,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("transport: {0}")]
    Transport(#[from] reqwest::Error),
    #[error("server returned {status}: {body}")]
    Server { status: u16, body: String },
    #[error("timed out waiting for job {0}")]
    Timeout(u64),
}

#[derive(Debug, Clone)]
pub struct ExoClient {
    base: String,
    http: reqwest::Client,
}

impl ExoClient {
    pub fn new(base_url: impl Into<String>) -> Self {
        let mut base = base_url.into();
        while base.ends_with('/') {
            base.pop();
        }
        Self { base, http: reqwest::Client::new() }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    async fn parse<T: serde::de::DeserializeOwned>(
        response: reqwest::Response,
    ) -> Result<T, ClientError> {
        let status = response.status();
        if status.is_success() {
            Ok(response.json().await?)
        } else {
            let body = response.text().await.unwrap_or_default();
            Err(ClientError::Server { status: status.as_u16(), body })
        }
    }

    pub async fn health(&self) -> Result<HealthResponse, ClientError> {
        Self::parse(self.http.get(format!("{}/health", self.base)).send().await?).await
    }

    pub async fn presets(&self) -> Result<Vec<String>, ClientError> {
        Self::parse(self.http.get(format!("{}/api/v1/presets", self.base)).send().await?).await
    }

    pub async fn submit(&self, request: &JobRequest) -> Result<u64, ClientError> {
        let response: SubmitResponse = Self::parse(
            self.http.post(format!("{}/api/v1/jobs", self.base)).json(request).send().await?,
        )
        .await?;
        Ok(response.id)
    }

    pub async fn jobs(&self) -> Result<Vec<JobSummary>, ClientError> {
        Self::parse(self.http.get(format!("{}/api/v1/jobs", self.base)).send().await?).await
    }

    pub async fn job(&self, id: u64) -> Result<JobSummary, ClientError> {
        Self::parse(self.http.get(format!("{}/api/v1/jobs/{id}", self.base)).send().await?).await
    }

    pub async fn cancel(&self, id: u64) -> Result<JobSummary, ClientError> {
        Self::parse(self.http.post(format!("{}/api/v1/jobs/{id}/cancel", self.base)).send().await?)
            .await
    }

    pub async fn artifacts(&self, id: u64) -> Result<ArtifactList, ClientError> {
        Self::parse(
            self.http.get(format!("{}/api/v1/jobs/{id}/artifacts", self.base)).send().await?,
        )
        .await
    }

    /// Poll until the job leaves the queued/running states. The callback
    /// sees every status snapshot; `timeout` of `None` waits indefinitely.
    pub async fn wait(
        &self,
        id: u64,
        poll: Duration,
        timeout: Option<Duration>,
        mut on_update: impl FnMut(&JobSummary),
    ) -> Result<JobSummary, ClientError> {
        let start = std::time::Instant::now();
        loop {
            let summary = self.job(id).await?;
            on_update(&summary);
            match summary.status {
                JobStatus::Finished | JobStatus::Failed | JobStatus::Cancelled => {
                    return Ok(summary)
                }
                JobStatus::Queued | JobStatus::Running => {}
            }
            if let Some(limit) = timeout {
                if start.elapsed() > limit {
                    return Err(ClientError::Timeout(id));
                }
            }
            tokio::time::sleep(poll).await;
        }
    }

    pub async fn compute_cop(&self, request: &CopRequest) -> Result<CopResponse, ClientError> {
        self.post_json("compute/cop", request).await
    }

    pub async fn compute_pd_torque(
        &self,
        request: &PdTorqueRequest,
    ) -> Result<PdTorqueResponse, ClientError> {
        self.post_json("compute/pd-torque", request).await
    }

    pub async fn compute_reward(
        &self,
        request: &RewardRequest,
    ) -> Result<RewardResponse, ClientError> {
        self.post_json("compute/reward", request).await
    }

    pub async fn compute_gae(&self, request: &GaeRequest) -> Result<GaeResponse, ClientError> {
        self.post_json("compute/gae", request).await
    }

    async fn post_json<Req: serde::Serialize, Resp: serde::de::DeserializeOwned>(
        &self,
        endpoint: &str,
        request: &Req,
    ) -> Result<Resp, ClientError> {
        Self::parse(
            self.http
                .post(format!("{}/api/v1/{endpoint}", self.base))
                .json(request)
                .send()
                .await?,
        )
        .await
    }
}
