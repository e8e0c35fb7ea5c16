//! HTTP client for the scheduler control API.

use super::server::{BatchSubmission, BatchSubmitResponse};
use super::{BatchJob, ClusterStatus};
use crate::http::ErrorBody;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SchedClientError {
    #[error("scheduler at {url} unreachable: {message}")]
    Transport { url: String, message: String },
    #[error("{code}: {message}")]
    Rejected { code: String, message: String },
    #[error("unexpected scheduler response: {0}")]
    Protocol(String),
}

#[derive(Clone, Debug)]
pub struct SchedulerClient {
    http: reqwest::Client,
    base: String,
}

impl SchedulerClient {
    pub fn new(base: impl Into<String>) -> Self {
        let base = base.into().trim_end_matches('/').to_string();
        SchedulerClient { http: reqwest::Client::new(), base }
    }

    pub fn url(&self) -> &str {
        &self.base
    }

    fn transport(&self, e: reqwest::Error) -> SchedClientError {
        SchedClientError::Transport { url: self.base.clone(), message: e.to_string() }
    }

    async fn decode<T: serde::de::DeserializeOwned>(&self, resp: reqwest::Response) -> Result<T, SchedClientError> {
        let status = resp.status();
        let bytes = resp.bytes().await.map_err(|e| self.transport(e))?;
        if status.is_success() {
            return serde_json::from_slice(&bytes).map_err(|e| SchedClientError::Protocol(e.to_string()));
        }
        match serde_json::from_slice::<ErrorBody>(&bytes) {
            Ok(b) => Err(SchedClientError::Rejected { code: b.code, message: b.message }),
            Err(_) => Err(SchedClientError::Protocol(format!("HTTP {status}: {}", String::from_utf8_lossy(&bytes)))),
        }
    }

    pub async fn submit(&self, submission: &BatchSubmission) -> Result<BatchSubmitResponse, SchedClientError> {
        let resp = self.http.post(format!("{}/v1/batch", self.base)).json(submission).send().await.map_err(|e| self.transport(e))?;
        self.decode(resp).await
    }

    pub async fn job(&self, job_id: &str) -> Result<BatchJob, SchedClientError> {
        let resp = self.http.get(format!("{}/v1/batch/{job_id}", self.base)).send().await.map_err(|e| self.transport(e))?;
        self.decode(resp).await
    }

    pub async fn cancel(&self, job_id: &str) -> Result<BatchJob, SchedClientError> {
        let resp = self.http.delete(format!("{}/v1/batch/{job_id}", self.base)).send().await.map_err(|e| self.transport(e))?;
        self.decode(resp).await
    }

    pub async fn status(&self) -> Result<ClusterStatus, SchedClientError> {
        let resp = self.http.get(format!("{}/v1/cluster/status", self.base)).send().await.map_err(|e| self.transport(e))?;
        self.decode(resp).await
    }
}
