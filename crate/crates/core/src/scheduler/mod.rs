//! Multi-user batch scheduler for CPU slots, GPU slots and QPU licenses.
//!
//! A QPU license is an exclusive lease on one device endpoint; jobs are
//! handed the concrete endpoint URLs they hold. Pending jobs are scanned in
//! descending fair-share priority (ties by submission order) and started
//! first-fit when their whole request fits. There is no preemption, no
//! partial grants and no backfill reservation.
//!
//! Priority is `share_weight / (1 + decayed_usage)`, where usage accrues
//! resource-seconds on completion and halves every `half_life_s`.
//!
//! [`Scheduler`] is a pure state machine driven by explicit timestamps; the
//! HTTP front end in [`server`] serialises all calls through one lock.

pub mod client;
pub mod server;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceRequest {
    #[serde(default)]
    pub cpus: u32,
    #[serde(default)]
    pub gpus: u32,
    #[serde(default)]
    pub qpus: u32,
}

impl ResourceRequest {
    pub fn new(cpus: u32, gpus: u32, qpus: u32) -> Self {
        ResourceRequest { cpus, gpus, qpus }
    }

    pub fn total_units(&self) -> u32 {
        self.cpus + self.gpus + self.qpus
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation {
    pub cpus: u32,
    pub gpus: u32,
    pub qpu_endpoints: Vec<String>,
}

/// Named workload with free-form parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub name: String,
    #[serde(default)]
    pub params: serde_json::Value,
}

impl WorkloadSpec {
    pub fn new(name: impl Into<String>, params: serde_json::Value) -> Self {
        WorkloadSpec { name: name.into(), params }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BatchState {
    Pending,
    Running,
    Done,
    Failed,
    Cancelled,
}

impl BatchState {
    pub fn is_terminal(self) -> bool {
        matches!(self, BatchState::Done | BatchState::Failed | BatchState::Cancelled)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BatchState::Pending => "pending",
            BatchState::Running => "running",
            BatchState::Done => "done",
            BatchState::Failed => "failed",
            BatchState::Cancelled => "cancelled",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchJob {
    pub job_id: String,
    pub owner: String,
    pub request: ResourceRequest,
    pub workload: WorkloadSpec,
    pub state: BatchState,
    pub priority: f64,
    pub submit_seq: u64,
    pub granted: Option<Allocation>,
    pub submitted_at: f64,
    pub started_at: Option<f64>,
    pub finished_at: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserAccount {
    pub user: String,
    pub decayed_usage: f64,
    pub share_weight: f64,
    /// Timestamp `decayed_usage` refers to.
    pub as_of: f64,
}

impl UserAccount {
    fn usage_at(&self, now: f64, half_life: f64) -> f64 {
        let dt = (now - self.as_of).max(0.0);
        self.decayed_usage * 0.5f64.powf(dt / half_life)
    }

    fn decay_to(&mut self, now: f64, half_life: f64) {
        if now > self.as_of {
            self.decayed_usage = self.usage_at(now, half_life);
            self.as_of = now;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LicenseState {
    Free,
    Held,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QpuLicense {
    pub endpoint: String,
    pub state: LicenseState,
    pub holder: Option<String>,
    pub up: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResourcePool {
    pub cpu_slots: u32,
    pub gpu_slots: u32,
    pub cpu_free: u32,
    pub gpu_free: u32,
    pub qpus: Vec<QpuLicense>,
}

impl ResourcePool {
    fn new(cpu_slots: u32, gpu_slots: u32, endpoints: &[String]) -> Self {
        ResourcePool {
            cpu_slots,
            gpu_slots,
            cpu_free: cpu_slots,
            gpu_free: gpu_slots,
            qpus: endpoints
                .iter()
                .map(|e| QpuLicense { endpoint: e.clone(), state: LicenseState::Free, holder: None, up: true })
                .collect(),
        }
    }

    pub fn qpu_free(&self) -> usize {
        self.qpus.iter().filter(|q| q.state == LicenseState::Free).count()
    }

    pub fn qpu_held(&self) -> usize {
        self.qpus.iter().filter(|q| q.state == LicenseState::Held).count()
    }

    fn grantable_qpus(&self) -> impl Iterator<Item = usize> + '_ {
        self.qpus
            .iter()
            .enumerate()
            .filter(|(_, q)| q.state == LicenseState::Free && q.up)
            .map(|(i, _)| i)
    }

    fn fits(&self, r: &ResourceRequest) -> bool {
        r.cpus <= self.cpu_free && r.gpus <= self.gpu_free && r.qpus as usize <= self.grantable_qpus().count()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchedulerConfig {
    pub cpu_slots: u32,
    pub gpu_slots: u32,
    pub qpu_endpoints: Vec<String>,
    pub half_life_s: f64,
    pub tick_interval_ms: u64,
    /// Per-user share weights; unlisted users get 1.0.
    pub share_weights: BTreeMap<String, f64>,
    pub host: String,
    pub port: u16,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        SchedulerConfig {
            cpu_slots: 8,
            gpu_slots: 2,
            qpu_endpoints: Vec::new(),
            half_life_s: 300.0,
            tick_interval_ms: 100,
            share_weights: BTreeMap::new(),
            host: "127.0.0.1".into(),
            port: 8200,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SchedErrorCode {
    Unsatisfiable,
    BadWorkload,
    EmptyRequest,
    InvalidState,
    NotFound,
}

impl SchedErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            SchedErrorCode::Unsatisfiable => "UNSATISFIABLE",
            SchedErrorCode::BadWorkload => "BAD_WORKLOAD",
            SchedErrorCode::EmptyRequest => "EMPTY_REQUEST",
            SchedErrorCode::InvalidState => "INVALID_STATE",
            SchedErrorCode::NotFound => "NOT_FOUND",
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{}: {message}", code.as_str())]
pub struct SchedError {
    pub code: SchedErrorCode,
    pub message: String,
}

impl SchedError {
    fn new(code: SchedErrorCode, message: impl Into<String>) -> Self {
        SchedError { code, message: message.into() }
    }
}

/// Linearised record of every state change.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SchedEvent {
    Submitted { job_id: String, at: f64 },
    Started { job_id: String, allocation: Allocation, at: f64 },
    Finished { job_id: String, allocation: Allocation, success: bool, at: f64 },
    Cancelled { job_id: String, at: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterStatus {
    pub cpu_total: u32,
    pub cpu_free: u32,
    pub gpu_total: u32,
    pub gpu_free: u32,
    pub qpu_total: usize,
    pub qpu_free: usize,
    pub qpu_held: usize,
    pub qpus: Vec<QpuLicense>,
    pub pending: Vec<BatchJob>,
    pub running: Vec<BatchJob>,
    pub finished: Vec<BatchJob>,
    pub users: Vec<UserAccount>,
}

pub struct Scheduler {
    config: SchedulerConfig,
    pool: ResourcePool,
    jobs: BTreeMap<u64, BatchJob>,
    accounts: BTreeMap<String, UserAccount>,
    known_workloads: Vec<String>,
    next_seq: u64,
    events: Vec<SchedEvent>,
}

impl Scheduler {
    pub fn new(config: SchedulerConfig, known_workloads: Vec<String>) -> Self {
        let pool = ResourcePool::new(config.cpu_slots, config.gpu_slots, &config.qpu_endpoints);
        Scheduler { config, pool, jobs: BTreeMap::new(), accounts: BTreeMap::new(), known_workloads, next_seq: 0, events: Vec::new() }
    }

    pub fn config(&self) -> &SchedulerConfig {
        &self.config
    }

    pub fn pool(&self) -> &ResourcePool {
        &self.pool
    }

    pub fn events(&self) -> &[SchedEvent] {
        &self.events
    }

    pub fn set_endpoint_health(&mut self, endpoint: &str, up: bool) {
        for q in self.pool.qpus.iter_mut().filter(|q| q.endpoint == endpoint) {
            q.up = up;
        }
    }

    fn account_mut(&mut self, user: &str, now: f64) -> &mut UserAccount {
        let weight = self.config.share_weights.get(user).copied().unwrap_or(1.0);
        self.accounts.entry(user.to_string()).or_insert_with(|| UserAccount {
            user: user.to_string(),
            decayed_usage: 0.0,
            share_weight: weight,
            as_of: now,
        })
    }

    /// Sets a user's usage directly, e.g. to seed historical accounting.
    pub fn set_usage(&mut self, user: &str, usage: f64, now: f64) {
        let acct = self.account_mut(user, now);
        acct.decayed_usage = usage.max(0.0);
        acct.as_of = now;
    }

    pub fn usage(&self, user: &str, now: f64) -> f64 {
        self.accounts.get(user).map_or(0.0, |a| a.usage_at(now, self.config.half_life_s))
    }

    /// Fair-share priority of a user at `now`; higher runs first.
    pub fn user_priority(&self, user: &str, now: f64) -> f64 {
        let weight = self
            .accounts
            .get(user)
            .map(|a| a.share_weight)
            .or_else(|| self.config.share_weights.get(user).copied())
            .unwrap_or(1.0);
        weight / (1.0 + self.usage(user, now))
    }

    pub fn priority(&self, job_id: &str, now: f64) -> Result<f64, SchedError> {
        let job = self.job(job_id)?;
        Ok(self.user_priority(&job.owner, now))
    }

    fn seq_of(job_id: &str) -> Option<u64> {
        job_id.strip_prefix("batch-")?.parse().ok()
    }

    pub fn job(&self, job_id: &str) -> Result<&BatchJob, SchedError> {
        Self::seq_of(job_id)
            .and_then(|s| self.jobs.get(&s))
            .ok_or_else(|| SchedError::new(SchedErrorCode::NotFound, format!("no batch job {job_id}")))
    }

    pub fn submit(&mut self, owner: &str, request: ResourceRequest, workload: WorkloadSpec, now: f64) -> Result<String, SchedError> {
        if request.total_units() == 0 {
            return Err(SchedError::new(SchedErrorCode::EmptyRequest, "request asks for no resources"));
        }
        if !self.known_workloads.contains(&workload.name) {
            return Err(SchedError::new(
                SchedErrorCode::BadWorkload,
                format!("unknown workload {:?} (known: {})", workload.name, self.known_workloads.join(", ")),
            ));
        }
        let qpu_total = self.pool.qpus.len() as u32;
        if request.cpus > self.pool.cpu_slots || request.gpus > self.pool.gpu_slots || request.qpus > qpu_total {
            return Err(SchedError::new(
                SchedErrorCode::Unsatisfiable,
                format!(
                    "request cpus={} gpus={} qpus={} exceeds pool cpus={} gpus={} qpus={}",
                    request.cpus, request.gpus, request.qpus, self.pool.cpu_slots, self.pool.gpu_slots, qpu_total
                ),
            ));
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        let job_id = format!("batch-{seq:06}");
        self.account_mut(owner, now);
        let priority = self.user_priority(owner, now);
        self.jobs.insert(
            seq,
            BatchJob {
                job_id: job_id.clone(),
                owner: owner.to_string(),
                request,
                workload,
                state: BatchState::Pending,
                priority,
                submit_seq: seq,
                granted: None,
                submitted_at: now,
                started_at: None,
                finished_at: None,
                output: None,
                error: None,
            },
        );
        self.events.push(SchedEvent::Submitted { job_id: job_id.clone(), at: now });
        Ok(job_id)
    }

    /// Pending job ids in scan order: priority descending, then submission order.
    pub fn pending_order(&self, now: f64) -> Vec<String> {
        let mut pending: Vec<(f64, u64, String)> = self
            .jobs
            .values()
            .filter(|j| j.state == BatchState::Pending)
            .map(|j| (self.user_priority(&j.owner, now), j.submit_seq, j.job_id.clone()))
            .collect();
        pending.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        pending.into_iter().map(|(_, _, id)| id).collect()
    }

    /// Starts every pending job that fits, in priority order. Returns the
    /// newly started job ids.
    pub fn schedule_tick(&mut self, now: f64) -> Vec<String> {
        let order = self.pending_order(now);
        let mut started = Vec::new();
        for job_id in order {
            let seq = Self::seq_of(&job_id).unwrap();
            let priority = self.user_priority(&self.jobs[&seq].owner, now);
            let request = self.jobs[&seq].request;
            let job = self.jobs.get_mut(&seq).unwrap();
            job.priority = priority;
            if !self.pool.fits(&request) {
                continue;
            }
            let picked: Vec<usize> = self.pool.grantable_qpus().take(request.qpus as usize).collect();
            for &i in &picked {
                self.pool.qpus[i].state = LicenseState::Held;
                self.pool.qpus[i].holder = Some(job_id.clone());
            }
            self.pool.cpu_free -= request.cpus;
            self.pool.gpu_free -= request.gpus;
            let allocation = Allocation {
                cpus: request.cpus,
                gpus: request.gpus,
                qpu_endpoints: picked.iter().map(|&i| self.pool.qpus[i].endpoint.clone()).collect(),
            };
            job.state = BatchState::Running;
            job.started_at = Some(now);
            job.granted = Some(allocation.clone());
            self.events.push(SchedEvent::Started { job_id: job_id.clone(), allocation, at: now });
            started.push(job_id);
        }
        started
    }

    /// Releases a running job's resources and charges its owner
    /// `(cpus + gpus + qpus) * wall_seconds` of usage.
    pub fn complete(&mut self, job_id: &str, outcome: Result<serde_json::Value, String>, now: f64) -> Result<(), SchedError> {
        let seq = Self::seq_of(job_id)
            .filter(|s| self.jobs.contains_key(s))
            .ok_or_else(|| SchedError::new(SchedErrorCode::NotFound, format!("no batch job {job_id}")))?;
        let job = self.jobs.get_mut(&seq).unwrap();
        if job.state != BatchState::Running {
            return Err(SchedError::new(SchedErrorCode::InvalidState, format!("job {job_id} is {:?}, not running", job.state)));
        }
        let allocation = job.granted.clone().expect("running job has an allocation");
        let wall = (now - job.started_at.unwrap_or(now)).max(0.0);
        let success = outcome.is_ok();
        job.state = if success { BatchState::Done } else { BatchState::Failed };
        job.finished_at = Some(now);
        match outcome {
            Ok(v) => job.output = Some(v),
            Err(e) => job.error = Some(e),
        }
        let owner = job.owner.clone();
        let charge = f64::from(job.request.total_units()) * wall;

        self.pool.cpu_free += allocation.cpus;
        self.pool.gpu_free += allocation.gpus;
        for q in self.pool.qpus.iter_mut().filter(|q| q.holder.as_deref() == Some(job_id)) {
            q.state = LicenseState::Free;
            q.holder = None;
        }
        let half_life = self.config.half_life_s;
        let acct = self.account_mut(&owner, now);
        acct.decay_to(now, half_life);
        acct.decayed_usage += charge;
        self.events.push(SchedEvent::Finished { job_id: job_id.to_string(), allocation, success, at: now });
        Ok(())
    }

    pub fn cancel(&mut self, job_id: &str, now: f64) -> Result<(), SchedError> {
        let seq = Self::seq_of(job_id)
            .filter(|s| self.jobs.contains_key(s))
            .ok_or_else(|| SchedError::new(SchedErrorCode::NotFound, format!("no batch job {job_id}")))?;
        let job = self.jobs.get_mut(&seq).unwrap();
        if job.state != BatchState::Pending {
            return Err(SchedError::new(SchedErrorCode::InvalidState, format!("job {job_id} is {:?}, not pending", job.state)));
        }
        job.state = BatchState::Cancelled;
        job.finished_at = Some(now);
        self.events.push(SchedEvent::Cancelled { job_id: job_id.to_string(), at: now });
        Ok(())
    }

    pub fn status(&self, now: f64) -> ClusterStatus {
        let by_state = |s: BatchState| self.jobs.values().filter(|j| j.state == s).cloned().collect::<Vec<_>>();
        let finished = self.jobs.values().filter(|j| j.state.is_terminal()).cloned().collect();
        let half_life = self.config.half_life_s;
        ClusterStatus {
            cpu_total: self.pool.cpu_slots,
            cpu_free: self.pool.cpu_free,
            gpu_total: self.pool.gpu_slots,
            gpu_free: self.pool.gpu_free,
            qpu_total: self.pool.qpus.len(),
            qpu_free: self.pool.qpu_free(),
            qpu_held: self.pool.qpu_held(),
            qpus: self.pool.qpus.clone(),
            pending: by_state(BatchState::Pending),
            running: by_state(BatchState::Running),
            finished,
            users: self
                .accounts
                .values()
                .map(|a| UserAccount { decayed_usage: a.usage_at(now, half_life), as_of: now.max(a.as_of), ..a.clone() })
                .collect(),
        }
    }
}

/// Replays an event log and reports the first resource violation found.
pub fn check_event_log(events: &[SchedEvent], cpu_slots: u32, gpu_slots: u32, endpoints: &[String]) -> Result<(), String> {
    let mut cpu = 0u32;
    let mut gpu = 0u32;
    let mut holders: BTreeMap<&str, &str> = BTreeMap::new();
    for (i, ev) in events.iter().enumerate() {
        match ev {
            SchedEvent::Started { job_id, allocation, .. } => {
                cpu += allocation.cpus;
                gpu += allocation.gpus;
                if cpu > cpu_slots || gpu > gpu_slots {
                    return Err(format!("event {i}: oversubscribed cpu={cpu}/{cpu_slots} gpu={gpu}/{gpu_slots}"));
                }
                for e in &allocation.qpu_endpoints {
                    if !endpoints.contains(e) {
                        return Err(format!("event {i}: unknown endpoint {e}"));
                    }
                    if let Some(h) = holders.insert(e, job_id) {
                        return Err(format!("event {i}: {e} granted to {job_id} while held by {h}"));
                    }
                }
            }
            SchedEvent::Finished { job_id, allocation, .. } => {
                cpu = cpu.checked_sub(allocation.cpus).ok_or(format!("event {i}: cpu underflow"))?;
                gpu = gpu.checked_sub(allocation.gpus).ok_or(format!("event {i}: gpu underflow"))?;
                for e in &allocation.qpu_endpoints {
                    if holders.remove(e.as_str()) != Some(job_id.as_str()) {
                        return Err(format!("event {i}: {job_id} released {e} it did not hold"));
                    }
                }
            }
            SchedEvent::Submitted { .. } | SchedEvent::Cancelled { .. } => {}
        }
    }
    Ok(())
}
