//! Emulation of a single photonic QPU behind an HTTP/JSON job API.
//!
//! Jobs are validated against the device envelope on submission, queued in
//! arrival order, and executed one at a time by a single worker task. Each job
//! occupies the device for `base_latency + per_shot_latency * n_samples`.
//! All state lives in memory and is lost when the service stops.

mod api;

use std::collections::{HashMap, VecDeque};
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tokio::sync::Notify;
use tokio::task::JoinHandle;

use crate::fock::{self, CircuitSpec, ExactGuard, FockError, FockState, Histogram};
use crate::http::unix_micros;

pub use api::router;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceConfig {
    pub device_id: String,
    pub num_modes: usize,
    pub max_photons: u32,
    /// Loop lengths the device can realise; `None` accepts any `1 <= L < M`.
    pub allowed_loop_lengths: Option<Vec<usize>>,
    pub base_latency_ms: f64,
    pub per_shot_latency_ms: f64,
    pub queue_capacity: usize,
    pub host: String,
    pub port: u16,
    pub guard: ExactGuard,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        DeviceConfig {
            device_id: "qpu0".into(),
            num_modes: 8,
            max_photons: 4,
            allowed_loop_lengths: None,
            base_latency_ms: 50.0,
            per_shot_latency_ms: 0.1,
            queue_capacity: 1024,
            host: "127.0.0.1".into(),
            port: 8100,
            guard: ExactGuard::default(),
        }
    }
}

impl DeviceConfig {
    /// A device with no artificial latency, for tests and local backends.
    pub fn instant(device_id: impl Into<String>) -> Self {
        DeviceConfig { device_id: device_id.into(), base_latency_ms: 0.0, per_shot_latency_ms: 0.0, ..Default::default() }
    }

    pub fn service_time(&self, shots: u64) -> Duration {
        let ms = self.base_latency_ms + self.per_shot_latency_ms * shots as f64;
        Duration::from_secs_f64(ms.max(0.0) / 1000.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Running,
    Completed,
    Failed,
    Cancelled,
}

impl JobState {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Completed | JobState::Failed | JobState::Cancelled)
    }
}

/// Snapshot of one job. Timestamps are microseconds since the Unix epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub job_id: String,
    pub owner: String,
    pub spec: CircuitSpec,
    pub seed: u64,
    pub state: JobState,
    /// Position in the accepted-submission order.
    pub accept_index: u64,
    /// Position in the execution order, once started.
    pub start_index: Option<u64>,
    pub submitted_at: u64,
    pub started_at: Option<u64>,
    pub finished_at: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<Histogram>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviceStatus {
    pub device_id: String,
    pub max_photons: u32,
    pub num_modes: usize,
    pub queue_depth: usize,
    pub jobs_completed: u64,
    pub jobs_failed: u64,
    pub uptime_s: f64,
    pub busy: bool,
}

/// Machine-readable rejection reasons.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RejectCode {
    ModeMismatch,
    PhotonLimit,
    AngleCount,
    BadShots,
    BadLoop,
    QueueFull,
    NotFound,
    NotCancellable,
}

impl RejectCode {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectCode::ModeMismatch => "MODE_MISMATCH",
            RejectCode::PhotonLimit => "PHOTON_LIMIT",
            RejectCode::AngleCount => "ANGLE_COUNT",
            RejectCode::BadShots => "BAD_SHOTS",
            RejectCode::BadLoop => "BAD_LOOP",
            RejectCode::QueueFull => "QUEUE_FULL",
            RejectCode::NotFound => "NOT_FOUND",
            RejectCode::NotCancellable => "NOT_CANCELLABLE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{}: {message}", code.as_str())]
pub struct ServiceError {
    pub code: RejectCode,
    pub message: String,
}

impl ServiceError {
    fn new(code: RejectCode, message: impl Into<String>) -> Self {
        ServiceError { code, message: message.into() }
    }
}

impl From<FockError> for ServiceError {
    fn from(e: FockError) -> Self {
        let code = match e {
            FockError::ModeMismatch { .. } => RejectCode::ModeMismatch,
            FockError::PhotonLimit { .. } => RejectCode::PhotonLimit,
            FockError::AngleCount { .. } => RejectCode::AngleCount,
            FockError::BadShots => RejectCode::BadShots,
            _ => RejectCode::BadLoop,
        };
        ServiceError::new(code, e.to_string())
    }
}

/// Job submission body; field names follow the circuit description used by
/// the client SDKs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobSubmission {
    pub input_state: Vec<u32>,
    pub loop_lengths: Vec<usize>,
    pub bs_angles: Vec<f64>,
    pub n_samples: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl JobSubmission {
    pub fn from_spec(spec: &CircuitSpec, seed: Option<u64>) -> Self {
        JobSubmission {
            input_state: spec.input_state.occupations().to_vec(),
            loop_lengths: spec.loop_lengths.clone(),
            bs_angles: spec.bs_angles.clone(),
            n_samples: spec.n_samples,
            seed,
        }
    }

    pub fn to_spec(&self) -> CircuitSpec {
        CircuitSpec::new(
            FockState::new(self.input_state.clone()),
            self.loop_lengths.clone(),
            self.bs_angles.clone(),
            self.n_samples,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubmitResponse {
    pub job_id: String,
    pub state: JobState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultsBody {
    pub job_id: String,
    pub state: JobState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram: Option<Histogram>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Default)]
struct ServiceState {
    queue: VecDeque<String>,
    jobs: HashMap<String, JobRecord>,
    next_accept: u64,
    next_start: u64,
    running: Option<String>,
    jobs_completed: u64,
    jobs_failed: u64,
}

struct Inner {
    config: DeviceConfig,
    state: Mutex<ServiceState>,
    wake: Notify,
    started: Instant,
}

/// Handle to one emulated device. Cloning shares the same device.
#[derive(Clone)]
pub struct QpuService {
    inner: Arc<Inner>,
}

impl QpuService {
    /// Creates the device and spawns its executor on the current runtime.
    pub fn start(config: DeviceConfig) -> (Self, JoinHandle<()>) {
        let svc = QpuService {
            inner: Arc::new(Inner {
                config,
                state: Mutex::new(ServiceState::default()),
                wake: Notify::new(),
                started: Instant::now(),
            }),
        };
        let worker = tokio::spawn(svc.clone().run_loop());
        (svc, worker)
    }

    pub fn config(&self) -> &DeviceConfig {
        &self.inner.config
    }

    /// Checks a spec against the device envelope.
    pub fn validate(&self, spec: &CircuitSpec) -> Result<(), ServiceError> {
        let cfg = &self.inner.config;
        if spec.num_modes != cfg.num_modes || spec.input_state.num_modes() != cfg.num_modes {
            return Err(ServiceError::new(
                RejectCode::ModeMismatch,
                format!("device has {} modes, input state has {}", cfg.num_modes, spec.input_state.num_modes()),
            ));
        }
        if let Some(allowed) = &cfg.allowed_loop_lengths {
            if let Some(l) = spec.loop_lengths.iter().find(|l| !allowed.contains(l)) {
                return Err(ServiceError::new(
                    RejectCode::BadLoop,
                    format!("loop length {l} not supported (allowed: {allowed:?})"),
                ));
            }
        }
        spec.validate(Some(cfg.max_photons))?;
        Ok(())
    }

    pub fn submit_job(&self, spec: CircuitSpec, seed: Option<u64>, owner: &str) -> Result<String, ServiceError> {
        self.validate(&spec)?;
        let mut st = self.inner.state.lock().unwrap();
        if st.queue.len() >= self.inner.config.queue_capacity {
            return Err(ServiceError::new(
                RejectCode::QueueFull,
                format!("queue at capacity ({})", self.inner.config.queue_capacity),
            ));
        }
        let accept_index = st.next_accept;
        st.next_accept += 1;
        let job_id = format!("{}-{:06}", self.inner.config.device_id, accept_index);
        let record = JobRecord {
            job_id: job_id.clone(),
            owner: owner.to_string(),
            spec,
            seed: seed.unwrap_or(accept_index),
            state: JobState::Queued,
            accept_index,
            start_index: None,
            submitted_at: unix_micros(),
            started_at: None,
            finished_at: None,
            result: None,
            error: None,
        };
        st.jobs.insert(job_id.clone(), record);
        st.queue.push_back(job_id.clone());
        drop(st);
        self.inner.wake.notify_one();
        Ok(job_id)
    }

    pub fn get_job(&self, job_id: &str) -> Result<JobRecord, ServiceError> {
        self.inner
            .state
            .lock()
            .unwrap()
            .jobs
            .get(job_id)
            .cloned()
            .ok_or_else(|| ServiceError::new(RejectCode::NotFound, format!("no job {job_id}")))
    }

    /// Removes a job that has not started yet.
    pub fn cancel_job(&self, job_id: &str) -> Result<JobRecord, ServiceError> {
        let mut st = self.inner.state.lock().unwrap();
        let state = st
            .jobs
            .get(job_id)
            .map(|r| r.state)
            .ok_or_else(|| ServiceError::new(RejectCode::NotFound, format!("no job {job_id}")))?;
        if state != JobState::Queued {
            return Err(ServiceError::new(RejectCode::NotCancellable, format!("job {job_id} is {state:?}")));
        }
        st.queue.retain(|id| id != job_id);
        let rec = st.jobs.get_mut(job_id).unwrap();
        rec.state = JobState::Cancelled;
        rec.finished_at = Some(unix_micros());
        Ok(rec.clone())
    }

    pub fn get_status(&self) -> DeviceStatus {
        let st = self.inner.state.lock().unwrap();
        let cfg = &self.inner.config;
        DeviceStatus {
            device_id: cfg.device_id.clone(),
            max_photons: cfg.max_photons,
            num_modes: cfg.num_modes,
            queue_depth: st.queue.len(),
            jobs_completed: st.jobs_completed,
            jobs_failed: st.jobs_failed,
            uptime_s: self.inner.started.elapsed().as_secs_f64(),
            busy: st.running.is_some(),
        }
    }

    /// All job records ordered by acceptance.
    pub fn jobs(&self) -> Vec<JobRecord> {
        let mut v: Vec<_> = self.inner.state.lock().unwrap().jobs.values().cloned().collect();
        v.sort_by_key(|r| r.accept_index);
        v
    }

    fn claim_next(&self) -> Option<JobRecord> {
        let mut st = self.inner.state.lock().unwrap();
        let id = st.queue.pop_front()?;
        let start_index = st.next_start;
        st.next_start += 1;
        st.running = Some(id.clone());
        let rec = st.jobs.get_mut(&id).unwrap();
        rec.state = JobState::Running;
        rec.start_index = Some(start_index);
        rec.started_at = Some(unix_micros().max(rec.submitted_at));
        Some(rec.clone())
    }

    fn finish(&self, job_id: &str, outcome: Result<Histogram, String>) {
        let mut st = self.inner.state.lock().unwrap();
        st.running = None;
        match &outcome {
            Ok(_) => st.jobs_completed += 1,
            Err(_) => st.jobs_failed += 1,
        }
        let rec = st.jobs.get_mut(job_id).unwrap();
        rec.finished_at = Some(unix_micros().max(rec.started_at.unwrap_or(0)));
        match outcome {
            Ok(h) => {
                rec.state = JobState::Completed;
                rec.result = Some(h);
            }
            Err(e) => {
                rec.state = JobState::Failed;
                rec.error = Some(e);
            }
        }
    }

    /// Sequential executor: oldest queued job first, one at a time.
    async fn run_loop(self) {
        loop {
            let Some(job) = self.claim_next() else {
                self.inner.wake.notified().await;
                continue;
            };
            let began = Instant::now();
            let guard = self.inner.config.guard;
            let spec = job.spec.clone();
            let seed = job.seed;
            let outcome = tokio::task::spawn_blocking(move || fock::sample_with_guard(&spec, seed, &guard))
                .await
                .map_err(|e| format!("executor panicked: {e}"))
                .and_then(|r| r.map_err(|e| e.to_string()));
            let service_time = self.inner.config.service_time(job.spec.n_samples);
            if let Some(rest) = service_time.checked_sub(began.elapsed()) {
                tokio::time::sleep(rest).await;
            }
            if let Err(e) = &outcome {
                tracing::warn!(job = %job.job_id, error = %e, "job failed");
            }
            self.finish(&job.job_id, outcome);
        }
    }
}

/// A device served over HTTP on a background task.
pub struct RunningService {
    pub addr: SocketAddr,
    pub service: QpuService,
    worker: JoinHandle<()>,
    server: JoinHandle<()>,
}

impl RunningService {
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn shutdown(self) {
        self.worker.abort();
        self.server.abort();
    }
}

impl Drop for RunningService {
    fn drop(&mut self) {
        self.worker.abort();
        self.server.abort();
    }
}

/// Binds `addr` (port 0 picks a free port) and serves the device API.
pub async fn spawn(config: DeviceConfig, addr: SocketAddr) -> std::io::Result<RunningService> {
    let listener = TcpListener::bind(addr).await?;
    spawn_on(config, listener)
}

pub fn spawn_on(config: DeviceConfig, listener: TcpListener) -> std::io::Result<RunningService> {
    let addr = listener.local_addr()?;
    let (service, worker) = QpuService::start(config);
    let app = router(service.clone());
    let server = tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, app).await {
            tracing::error!(error = %e, "qpu service stopped");
        }
    });
    Ok(RunningService { addr, service, worker, server })
}

/// Starts `n` instant (zero-latency) devices on loopback ports.
pub async fn spawn_local_devices(n: usize, template: &DeviceConfig) -> std::io::Result<Vec<RunningService>> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let cfg = DeviceConfig { device_id: format!("{}-{i}", template.device_id), ..template.clone() };
        out.push(spawn(cfg, SocketAddr::from(([127, 0, 0, 1], 0))).await?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_loop_spec(shots: u64) -> CircuitSpec {
        let angles = (0..14).map(|k| 0.1 * k as f64).collect();
        CircuitSpec::new(FockState::single_photons(8, &[0, 2, 4, 6]), vec![1, 1], angles, shots)
    }

    async fn wait_terminal(svc: &QpuService, id: &str) -> JobRecord {
        for _ in 0..2000 {
            let rec = svc.get_job(id).unwrap();
            if rec.state.is_terminal() {
                return rec;
            }
            tokio::time::sleep(Duration::from_millis(2)).await;
        }
        panic!("job {id} never finished");
    }

    #[tokio::test]
    async fn accepts_two_loop_circuit_and_rejects_out_of_envelope_specs() {
        let (svc, _w) = QpuService::start(DeviceConfig { base_latency_ms: 200.0, ..DeviceConfig::instant("d") });
        let id = svc.submit_job(two_loop_spec(100), Some(1), "alice").unwrap();
        assert_eq!(svc.get_job(&id).unwrap().owner, "alice");

        let five = CircuitSpec::identity(FockState::new(vec![2, 0, 1, 0, 1, 0, 1, 0]), vec![1, 1], 10);
        assert_eq!(svc.submit_job(five, None, "a").unwrap_err().code, RejectCode::PhotonLimit);

        let thirteen = CircuitSpec::new(FockState::single_photons(8, &[0]), vec![1, 1], vec![0.0; 13], 10);
        let err = svc.submit_job(thirteen, None, "a").unwrap_err();
        assert_eq!(err.code, RejectCode::AngleCount);
        assert!(err.message.contains("14"));

        let six_modes = CircuitSpec::identity(FockState::single_photons(6, &[0]), vec![1], 10);
        assert_eq!(svc.submit_job(six_modes, None, "a").unwrap_err().code, RejectCode::ModeMismatch);
        assert_eq!(svc.submit_job(two_loop_spec(0), None, "a").unwrap_err().code, RejectCode::BadShots);
        assert_eq!(svc.get_job("d-999999").unwrap_err().code, RejectCode::NotFound);
    }

    #[tokio::test]
    async fn fifo_execution_and_status() {
        let cfg = DeviceConfig { base_latency_ms: 80.0, ..DeviceConfig::instant("d") };
        let (svc, _w) = QpuService::start(cfg);
        let idle = svc.get_status();
        assert_eq!((idle.queue_depth, idle.busy), (0, false));

        let a = svc.submit_job(two_loop_spec(10), Some(1), "u").unwrap();
        tokio::time::sleep(Duration::from_millis(20)).await;
        let b = svc.submit_job(two_loop_spec(10), Some(2), "u").unwrap();
        let c = svc.submit_job(two_loop_spec(10), Some(3), "u").unwrap();
        let st = svc.get_status();
        assert_eq!((st.queue_depth, st.busy), (2, true));
        assert_eq!(svc.get_job(&b).unwrap().state, JobState::Queued);

        let ra = wait_terminal(&svc, &a).await;
        let rb = wait_terminal(&svc, &b).await;
        let rc = wait_terminal(&svc, &c).await;
        assert!(ra.finished_at.unwrap() <= rb.started_at.unwrap());
        assert!(rb.finished_at.unwrap() <= rc.started_at.unwrap());
        assert_eq!((ra.start_index, rb.start_index, rc.start_index), (Some(0), Some(1), Some(2)));
        for r in [&ra, &rb, &rc] {
            assert_eq!(r.result.as_ref().unwrap().total(), 10);
            assert!(r.started_at.unwrap() >= r.submitted_at);
        }
        assert_eq!(svc.get_status().jobs_completed, 3);
    }

    #[tokio::test]
    async fn failed_job_does_not_block_the_queue() {
        let cfg = DeviceConfig {
            max_photons: 8,
            guard: ExactGuard { max_photons: 4, max_modes: 12 },
            ..DeviceConfig::instant("d")
        };
        let (svc, _w) = QpuService::start(cfg);
        let big = CircuitSpec::identity(FockState::new(vec![1, 1, 1, 1, 1, 0, 0, 0]), vec![1, 1], 10);
        let bad = svc.submit_job(big, None, "u").unwrap();
        let good = svc.submit_job(two_loop_spec(10), None, "u").unwrap();
        let rbad = wait_terminal(&svc, &bad).await;
        assert_eq!(rbad.state, JobState::Failed);
        assert!(rbad.error.is_some() && rbad.result.is_none());
        let rgood = wait_terminal(&svc, &good).await;
        assert_eq!(rgood.state, JobState::Completed);
        assert!(rgood.error.is_none());
    }

    #[tokio::test]
    async fn cancel_only_queued_jobs_and_queue_capacity() {
        let cfg = DeviceConfig { base_latency_ms: 300.0, queue_capacity: 1, ..DeviceConfig::instant("d") };
        let (svc, _w) = QpuService::start(cfg);
        let running = svc.submit_job(two_loop_spec(1), None, "u").unwrap();
        tokio::time::sleep(Duration::from_millis(30)).await;
        let queued = svc.submit_job(two_loop_spec(1), None, "u").unwrap();
        assert_eq!(svc.submit_job(two_loop_spec(1), None, "u").unwrap_err().code, RejectCode::QueueFull);
        assert_eq!(svc.cancel_job(&running).unwrap_err().code, RejectCode::NotCancellable);
        assert_eq!(svc.cancel_job(&queued).unwrap().state, JobState::Cancelled);
        assert_eq!(svc.get_status().queue_depth, 0);
    }

    #[tokio::test]
    async fn same_seed_same_histogram() {
        let (svc, _w) = QpuService::start(DeviceConfig::instant("d"));
        let spec = two_loop_spec(2000);
        let a = svc.submit_job(spec.clone(), Some(42), "u").unwrap();
        let b = svc.submit_job(spec, Some(42), "u").unwrap();
        let ha = wait_terminal(&svc, &a).await.result.unwrap();
        let hb = wait_terminal(&svc, &b).await.result.unwrap();
        assert_eq!(ha, hb);
    }

    #[test]
    fn latency_model() {
        let cfg = DeviceConfig { base_latency_ms: 0.0, per_shot_latency_ms: 0.1, ..Default::default() };
        assert!((cfg.service_time(10_000).as_secs_f64() - 1.0).abs() < 1e-9);
        let cfg = DeviceConfig::default();
        assert!((cfg.service_time(10_000).as_secs_f64() - 1.05).abs() < 1e-9);
    }
}
