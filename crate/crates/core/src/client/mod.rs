//! Client side of the QPU job API: single-device sampling, shot splitting
//! across several devices, and observable estimation from histograms.

mod backend;
mod split;

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use tokio::task::JoinSet;

use crate::fock::{CircuitSpec, FockState, Histogram};
use crate::http::{ErrorBody, USER_HEADER};
use crate::service::{DeviceStatus, JobState, JobSubmission, ResultsBody, SubmitResponse};

pub use backend::{LocalBackend, SampleBackend};
pub use split::{split_shots, SplitPolicy};

#[derive(Debug, Clone, thiserror::Error)]
pub enum ClientError {
    #[error("transport error talking to {endpoint}: {message}")]
    Transport { endpoint: String, message: String },
    #[error("{endpoint} rejected the job: {code}: {message}")]
    Rejected { endpoint: String, code: String, message: String },
    #[error("job {job_id} on {endpoint} failed: {message}")]
    JobFailed { endpoint: String, job_id: String, message: String },
    #[error("unexpected response from {endpoint}: {message}")]
    Protocol { endpoint: String, message: String },
    #[error("no endpoint is up")]
    NoCapacity,
    #[error("{failed_shots} shots could not be completed after retry: {cause}")]
    PartialFailure { successful: Vec<ShardResult>, failed_shots: u64, cause: Box<ClientError> },
    #[error("need at least two shots to estimate an observable")]
    InsufficientData,
}

impl ClientError {
    /// Device reason code, for rejections.
    pub fn reject_code(&self) -> Option<&str> {
        match self {
            ClientError::Rejected { code, .. } => Some(code),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Health {
    Up,
    Down,
}

/// Exponential polling backoff.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PollConfig {
    pub initial: Duration,
    pub cap: Duration,
}

impl Default for PollConfig {
    fn default() -> Self {
        PollConfig { initial: Duration::from_millis(10), cap: Duration::from_millis(500) }
    }
}

/// Ordered device base URLs with a health flag each.
#[derive(Debug)]
pub struct EndpointPool {
    endpoints: Vec<String>,
    health: Mutex<Vec<Health>>,
    pub poll: PollConfig,
}

impl EndpointPool {
    pub fn new(endpoints: Vec<String>) -> Self {
        assert!(!endpoints.is_empty(), "endpoint pool needs at least one endpoint");
        let endpoints: Vec<String> = endpoints.into_iter().map(|e| e.trim_end_matches('/').to_string()).collect();
        let health = Mutex::new(vec![Health::Up; endpoints.len()]);
        EndpointPool { endpoints, health, poll: PollConfig::default() }
    }

    pub fn endpoints(&self) -> &[String] {
        &self.endpoints
    }

    pub fn len(&self) -> usize {
        self.endpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.endpoints.is_empty()
    }

    pub fn health(&self, idx: usize) -> Health {
        self.health.lock().unwrap()[idx]
    }

    pub fn set_health(&self, idx: usize, h: Health) {
        self.health.lock().unwrap()[idx] = h;
    }

    pub fn up_indices(&self) -> Vec<usize> {
        let h = self.health.lock().unwrap();
        (0..self.endpoints.len()).filter(|&i| h[i] == Health::Up).collect()
    }
}

/// Shots run on one endpoint as part of a split request.
#[derive(Clone, Debug, PartialEq)]
pub struct ShardResult {
    pub endpoint: String,
    pub shots: u64,
    pub seed: u64,
    pub histogram: Histogram,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleResult {
    pub histogram: Histogram,
    pub total_shots: u64,
    pub per_endpoint_shots: BTreeMap<String, u64>,
    pub wall_time: Duration,
}

impl SampleResult {
    fn from_shards(shards: &[ShardResult], wall_time: Duration) -> Self {
        let mut histogram = Histogram::new();
        let mut per_endpoint_shots = BTreeMap::new();
        for s in shards {
            histogram.merge(&s.histogram);
            *per_endpoint_shots.entry(s.endpoint.clone()).or_insert(0) += s.shots;
        }
        let total_shots = histogram.total();
        SampleResult { histogram, total_shots, per_endpoint_shots, wall_time }
    }
}

/// Quantity averaged over measured outcomes.
#[derive(Clone)]
pub enum Observable {
    /// Photon count in one mode.
    ModePhotons(usize),
    Custom(Arc<dyn Fn(&FockState) -> f64 + Send + Sync>),
}

impl Observable {
    pub fn custom(f: impl Fn(&FockState) -> f64 + Send + Sync + 'static) -> Self {
        Observable::Custom(Arc::new(f))
    }

    pub fn eval(&self, outcome: &FockState) -> f64 {
        match self {
            Observable::ModePhotons(m) => f64::from(outcome.get(*m)),
            Observable::Custom(f) => f(outcome),
        }
    }
}

/// Sample mean of the observable and its standard error `s / sqrt(N)`.
pub fn estimate_observable(result: &SampleResult, observable: &Observable) -> Result<(f64, f64), ClientError> {
    estimate_from_histogram(&result.histogram, observable)
}

pub fn estimate_from_histogram(hist: &Histogram, observable: &Observable) -> Result<(f64, f64), ClientError> {
    let n = hist.total();
    if n < 2 {
        return Err(ClientError::InsufficientData);
    }
    let nf = n as f64;
    let values: Vec<(f64, f64)> = hist.iter().map(|(k, c)| (observable.eval(k), c as f64)).collect();
    let mean = values.iter().map(|(v, c)| v * c).sum::<f64>() / nf;
    let ss: f64 = values.iter().map(|(v, c)| c * (v - mean).powi(2)).sum();
    let sd = (ss / (nf - 1.0)).sqrt();
    Ok((mean, sd / nf.sqrt()))
}

/// HTTP client over an [`EndpointPool`]. Cheap to clone.
#[derive(Clone)]
pub struct QpuClient {
    http: reqwest::Client,
    pool: Arc<EndpointPool>,
    user: String,
}

impl QpuClient {
    pub fn new(pool: EndpointPool) -> Self {
        Self::with_user(pool, "anonymous")
    }

    pub fn with_user(pool: EndpointPool, user: impl Into<String>) -> Self {
        let http = reqwest::Client::builder()
            .connect_timeout(Duration::from_secs(2))
            .timeout(Duration::from_secs(60))
            .build()
            .expect("http client");
        QpuClient { http, pool: Arc::new(pool), user: user.into() }
    }

    pub fn from_urls<S: Into<String>>(urls: impl IntoIterator<Item = S>) -> Self {
        Self::new(EndpointPool::new(urls.into_iter().map(Into::into).collect()))
    }

    pub fn pool(&self) -> &EndpointPool {
        &self.pool
    }

    fn transport(endpoint: &str, e: impl std::fmt::Display) -> ClientError {
        ClientError::Transport { endpoint: endpoint.to_string(), message: e.to_string() }
    }

    async fn decode<T: serde::de::DeserializeOwned>(endpoint: &str, resp: reqwest::Response) -> Result<T, ClientError> {
        let status = resp.status();
        let bytes = resp.bytes().await.map_err(|e| Self::transport(endpoint, e))?;
        if status.is_success() {
            return serde_json::from_slice(&bytes).map_err(|e| ClientError::Protocol {
                endpoint: endpoint.to_string(),
                message: e.to_string(),
            });
        }
        match serde_json::from_slice::<ErrorBody>(&bytes) {
            Ok(body) => Err(ClientError::Rejected { endpoint: endpoint.to_string(), code: body.code, message: body.message }),
            Err(_) => Err(ClientError::Protocol {
                endpoint: endpoint.to_string(),
                message: format!("HTTP {status}: {}", String::from_utf8_lossy(&bytes)),
            }),
        }
    }

    pub async fn status(&self, endpoint: &str) -> Result<DeviceStatus, ClientError> {
        let resp = self
            .http
            .get(format!("{endpoint}/v1/admin/status"))
            .send()
            .await
            .map_err(|e| Self::transport(endpoint, e))?;
        Self::decode(endpoint, resp).await
    }

    /// Probes every endpoint and records its health.
    pub async fn refresh_health(&self) -> Vec<Health> {
        let mut out = Vec::with_capacity(self.pool.len());
        for (i, ep) in self.pool.endpoints().iter().enumerate() {
            let h = if self.status(ep).await.is_ok() { Health::Up } else { Health::Down };
            self.pool.set_health(i, h);
            out.push(h);
        }
        out
    }

    pub async fn submit(&self, endpoint: &str, spec: &CircuitSpec, seed: Option<u64>) -> Result<String, ClientError> {
        let resp = self
            .http
            .post(format!("{endpoint}/v1/jobs"))
            .header(USER_HEADER, &self.user)
            .json(&JobSubmission::from_spec(spec, seed))
            .send()
            .await
            .map_err(|e| Self::transport(endpoint, e))?;
        let body: SubmitResponse = Self::decode(endpoint, resp).await?;
        Ok(body.job_id)
    }

    pub async fn results(&self, endpoint: &str, job_id: &str) -> Result<ResultsBody, ClientError> {
        let resp = self
            .http
            .get(format!("{endpoint}/v1/jobs/{job_id}/results"))
            .send()
            .await
            .map_err(|e| Self::transport(endpoint, e))?;
        Self::decode(endpoint, resp).await
    }

    /// Polls with exponential backoff until the job is terminal.
    pub async fn wait(&self, endpoint: &str, job_id: &str) -> Result<Histogram, ClientError> {
        let mut delay = self.pool.poll.initial;
        loop {
            let body = self.results(endpoint, job_id).await?;
            match body.state {
                JobState::Completed => {
                    return body.histogram.ok_or_else(|| ClientError::Protocol {
                        endpoint: endpoint.to_string(),
                        message: "completed job without histogram".into(),
                    })
                }
                JobState::Failed | JobState::Cancelled => {
                    return Err(ClientError::JobFailed {
                        endpoint: endpoint.to_string(),
                        job_id: job_id.to_string(),
                        message: body.error.unwrap_or_else(|| format!("{:?}", body.state)),
                    })
                }
                JobState::Queued | JobState::Running => {
                    tokio::time::sleep(delay).await;
                    delay = (delay * 2).min(self.pool.poll.cap);
                }
            }
        }
    }

    /// Runs the whole spec on one endpoint.
    pub async fn sample_sync(&self, endpoint: &str, spec: &CircuitSpec, seed: Option<u64>) -> Result<SampleResult, ClientError> {
        let started = Instant::now();
        let job_id = self.submit(endpoint, spec, seed).await?;
        let histogram = self.wait(endpoint, &job_id).await?;
        let shard = ShardResult { endpoint: endpoint.to_string(), shots: spec.n_samples, seed: seed.unwrap_or(0), histogram };
        Ok(SampleResult::from_shards(&[shard], started.elapsed()))
    }

    async fn run_shard(&self, idx: usize, spec: CircuitSpec, seed: u64) -> Result<ShardResult, ClientError> {
        let endpoint = self.pool.endpoints()[idx].clone();
        let shots = spec.n_samples;
        let job_id = self.submit(&endpoint, &spec, Some(seed)).await?;
        let histogram = self.wait(&endpoint, &job_id).await?;
        Ok(ShardResult { endpoint, shots, seed, histogram })
    }

    /// Splits the shot budget across the healthy endpoints, runs the shards
    /// concurrently and merges the histograms. Shard `k` uses seed
    /// `base_seed + k`. A failed shard is retried once on a surviving endpoint.
    pub async fn sample_multi(&self, spec: &CircuitSpec, policy: &SplitPolicy, base_seed: u64) -> Result<SampleResult, ClientError> {
        let started = Instant::now();
        let up = self.pool.up_indices();
        if up.is_empty() {
            return Err(ClientError::NoCapacity);
        }
        let shares = policy.shares(spec.n_samples, &up, self.pool.len());
        let mut set = JoinSet::new();
        for (k, &(idx, shots)) in shares.iter().enumerate() {
            let client = self.clone();
            let shard_spec = spec.with_shots(shots);
            let seed = base_seed.wrapping_add(k as u64);
            set.spawn(async move { (k, idx, shots, seed, client.run_shard(idx, shard_spec, seed).await) });
        }
        let mut successes: Vec<(usize, ShardResult)> = Vec::new();
        let mut failures = Vec::new();
        while let Some(joined) = set.join_next().await {
            let (k, idx, shots, seed, res) = joined.expect("shard task panicked");
            match res {
                Ok(s) => successes.push((k, s)),
                Err(e) => {
                    if matches!(e, ClientError::Transport { .. }) {
                        self.pool.set_health(idx, Health::Down);
                    }
                    tracing::warn!(endpoint = %self.pool.endpoints()[idx], error = %e, "shard failed");
                    failures.push((k, idx, shots, seed, e));
                }
            }
        }
        let mut first_error = None;
        let mut failed_shots = 0;
        for (k, idx, shots, seed, err) in failures {
            if matches!(err, ClientError::Rejected { .. }) {
                failed_shots += shots;
                first_error.get_or_insert(err);
                continue;
            }
            let survivors: Vec<usize> = self.pool.up_indices().into_iter().filter(|&i| i != idx).collect();
            let Some(&target) = survivors.get(k % survivors.len().max(1)) else {
                failed_shots += shots;
                first_error.get_or_insert(err);
                continue;
            };
            match self.run_shard(target, spec.with_shots(shots), seed).await {
                Ok(s) => successes.push((k, s)),
                Err(e) => {
                    failed_shots += shots;
                    first_error.get_or_insert(e);
                }
            }
        }
        successes.sort_by_key(|(k, _)| *k);
        let shards: Vec<ShardResult> = successes.into_iter().map(|(_, s)| s).collect();
        if let Some(cause) = first_error {
            // a whole-pool failure with nothing to show is a plain error
            if shards.is_empty() && self.pool.up_indices().is_empty() {
                return Err(ClientError::NoCapacity);
            }
            return Err(ClientError::PartialFailure { successful: shards, failed_shots, cause: Box::new(cause) });
        }
        Ok(SampleResult::from_shards(&shards, started.elapsed()))
    }
}
