//! HTTP control plane around [`Scheduler`] that also runs granted workloads.

use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tokio::task::JoinHandle;

use super::{BatchJob, BatchState, ClusterStatus, ResourceRequest, SchedError, SchedErrorCode, Scheduler, SchedulerConfig, WorkloadSpec};
use crate::client::QpuClient;
use crate::http::ApiError;
use crate::workload::{WorkloadContext, WorkloadRunner};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchSubmission {
    pub owner: String,
    pub request: ResourceRequest,
    pub workload: WorkloadSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchSubmitResponse {
    pub job_id: String,
    pub state: BatchState,
}

struct Shared {
    sched: Mutex<Scheduler>,
    runner: Arc<dyn WorkloadRunner>,
    epoch: Instant,
}

/// Shared scheduler plus workload dispatch. Cheap to clone.
#[derive(Clone)]
pub struct SchedulerHandle {
    shared: Arc<Shared>,
}

impl SchedulerHandle {
    pub fn new(config: SchedulerConfig, runner: Arc<dyn WorkloadRunner>) -> Self {
        let sched = Scheduler::new(config, runner.workload_names());
        SchedulerHandle { shared: Arc::new(Shared { sched: Mutex::new(sched), runner, epoch: Instant::now() }) }
    }

    /// Seconds since the scheduler started.
    pub fn now(&self) -> f64 {
        self.shared.epoch.elapsed().as_secs_f64()
    }

    pub fn with_scheduler<T>(&self, f: impl FnOnce(&mut Scheduler) -> T) -> T {
        f(&mut self.shared.sched.lock().unwrap())
    }

    pub fn submit(&self, sub: BatchSubmission) -> Result<String, SchedError> {
        let now = self.now();
        let id = self.with_scheduler(|s| s.submit(&sub.owner, sub.request, sub.workload, now))?;
        self.tick();
        Ok(id)
    }

    pub fn job(&self, id: &str) -> Result<BatchJob, SchedError> {
        self.with_scheduler(|s| s.job(id).cloned())
    }

    pub fn cancel(&self, id: &str) -> Result<BatchJob, SchedError> {
        let now = self.now();
        self.with_scheduler(|s| {
            s.cancel(id, now)?;
            s.job(id).cloned()
        })
    }

    pub fn status(&self) -> ClusterStatus {
        let now = self.now();
        self.with_scheduler(|s| s.status(now))
    }

    /// Runs a scheduling pass and launches whatever started.
    pub fn tick(&self) {
        let now = self.now();
        let started: Vec<BatchJob> = self.with_scheduler(|s| {
            let ids = s.schedule_tick(now);
            ids.iter().map(|id| s.job(id).cloned().unwrap()).collect()
        });
        for job in started {
            self.launch(job);
        }
    }

    fn launch(&self, job: BatchJob) {
        let handle = self.clone();
        let ctx = WorkloadContext {
            job_id: job.job_id.clone(),
            owner: job.owner.clone(),
            allocation: job.granted.clone().expect("granted"),
        };
        let fut = self.shared.runner.run(job.workload.clone(), ctx);
        tokio::spawn(async move {
            tracing::info!(job = %job.job_id, workload = %job.workload.name, "workload started");
            let outcome = fut.await;
            if let Err(e) = &outcome {
                tracing::warn!(job = %job.job_id, error = %e, "workload failed");
            }
            let now = handle.now();
            if let Err(e) = handle.with_scheduler(|s| s.complete(&job.job_id, outcome, now)) {
                tracing::error!(job = %job.job_id, error = %e, "completion rejected");
            }
            handle.tick();
        });
    }

    /// Probes every QPU endpoint and records its health in the pool.
    pub async fn probe_endpoints(&self) {
        let endpoints = self.with_scheduler(|s| s.config().qpu_endpoints.clone());
        if endpoints.is_empty() {
            return;
        }
        let client = QpuClient::from_urls(endpoints.clone());
        for ep in endpoints {
            let up = client.status(&ep).await.is_ok();
            if !up {
                tracing::warn!(endpoint = %ep, "QPU endpoint unreachable, marked down");
            }
            self.with_scheduler(|s| s.set_endpoint_health(&ep, up));
        }
    }
}

impl From<SchedError> for ApiError {
    fn from(e: SchedError) -> Self {
        let status = match e.code {
            SchedErrorCode::NotFound => StatusCode::NOT_FOUND,
            SchedErrorCode::InvalidState => StatusCode::CONFLICT,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError::new(status, e.code.as_str(), e.message)
    }
}

/// Routes:
///
/// - `POST /v1/batch` submit a batch job
/// - `GET /v1/batch/{id}` job snapshot
/// - `DELETE /v1/batch/{id}` cancel a pending job
/// - `GET /v1/cluster/status` pool, queues and usage
pub fn router(handle: SchedulerHandle) -> Router {
    Router::new()
        .route("/v1/batch", post(submit))
        .route("/v1/batch/{id}", get(get_job).delete(cancel))
        .route("/v1/cluster/status", get(status))
        .with_state(handle)
}

async fn submit(
    State(h): State<SchedulerHandle>,
    Json(body): Json<BatchSubmission>,
) -> Result<(StatusCode, Json<BatchSubmitResponse>), ApiError> {
    let id = h.submit(body)?;
    let state = h.job(&id)?.state;
    Ok((StatusCode::ACCEPTED, Json(BatchSubmitResponse { job_id: id, state })))
}

async fn get_job(State(h): State<SchedulerHandle>, Path(id): Path<String>) -> Result<Json<BatchJob>, ApiError> {
    Ok(Json(h.job(&id)?))
}

async fn cancel(State(h): State<SchedulerHandle>, Path(id): Path<String>) -> Result<Json<BatchJob>, ApiError> {
    Ok(Json(h.cancel(&id)?))
}

async fn status(State(h): State<SchedulerHandle>) -> Json<ClusterStatus> {
    Json(h.status())
}

pub struct RunningScheduler {
    pub addr: SocketAddr,
    pub handle: SchedulerHandle,
    tasks: Vec<JoinHandle<()>>,
}

impl RunningScheduler {
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for RunningScheduler {
    fn drop(&mut self) {
        for t in &self.tasks {
            t.abort();
        }
    }
}

/// Probes endpoints, then serves the control API with a periodic tick.
pub async fn spawn_on(config: SchedulerConfig, runner: Arc<dyn WorkloadRunner>, listener: TcpListener) -> std::io::Result<RunningScheduler> {
    let addr = listener.local_addr()?;
    let interval = Duration::from_millis(config.tick_interval_ms.max(1));
    let handle = SchedulerHandle::new(config, runner);
    handle.probe_endpoints().await;
    let app = router(handle.clone());
    let server = tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, app).await {
            tracing::error!(error = %e, "scheduler stopped");
        }
    });
    let ticker = {
        let handle = handle.clone();
        tokio::spawn(async move {
            let mut n: u64 = 0;
            loop {
                tokio::time::sleep(interval).await;
                n += 1;
                // re-probe roughly every five seconds so recovered devices rejoin
                if n.is_multiple_of((5000 / interval.as_millis().max(1) as u64).max(1)) {
                    let any_down = handle.with_scheduler(|s| s.pool().qpus.iter().any(|q| !q.up));
                    if any_down {
                        handle.probe_endpoints().await;
                    }
                }
                handle.tick();
            }
        })
    };
    Ok(RunningScheduler { addr, handle, tasks: vec![server, ticker] })
}

pub async fn spawn(config: SchedulerConfig, runner: Arc<dyn WorkloadRunner>, addr: SocketAddr) -> std::io::Result<RunningScheduler> {
    let listener = TcpListener::bind(addr).await?;
    spawn_on(config, runner, listener).await
}
