use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use photonic_hpc::client::{EndpointPool, QpuClient, SplitPolicy};
use photonic_hpc::fock::{CircuitSpec, FockState};
use photonic_hpc::scheduler::server::{self, BatchSubmission};
use photonic_hpc::scheduler::{BatchJob, BatchState, ClusterStatus, ResourceRequest, WorkloadSpec};
use photonic_hpc::service;
use photonic_hpc::workload::BuiltinWorkloads;
use photonic_hpc::SchedulerClient;
use serde_json::{json, Value};
use tokio::net::TcpListener;

use crate::args::{CancelArgs, QpuServeArgs, SampleArgs, SchedServeArgs, SplitArg, StatusArgs, SubmitArgs};
use crate::config::{resolve_endpoints, FileConfig};
use crate::error::CliError;
use crate::output::{emit, Format};

async fn bind(host: &str, port: u16) -> Result<TcpListener, CliError> {
    let addr: SocketAddr = format!("{host}:{port}")
        .parse()
        .map_err(|e| CliError::Config(format!("bad listen address {host}:{port}: {e}")))?;
    TcpListener::bind(addr).await.map_err(|e| CliError::Startup(format!("cannot bind {addr}: {e}")))
}

async fn wait_for_shutdown() -> Result<(), CliError> {
    tokio::signal::ctrl_c().await.map_err(|e| CliError::Startup(format!("signal handler: {e}")))
}

pub async fn qpu_serve(args: QpuServeArgs, cfg: FileConfig, format: Format) -> Result<(), CliError> {
    let mut dev = cfg.qpu;
    if let Some(v) = args.host {
        dev.host = v;
    }
    if let Some(v) = args.port {
        dev.port = v;
    }
    if let Some(v) = args.device_id {
        dev.device_id = v;
    }
    if let Some(v) = args.modes {
        dev.num_modes = v;
    }
    if let Some(v) = args.max_photons {
        dev.max_photons = v;
    }
    if let Some(v) = args.base_latency_ms {
        dev.base_latency_ms = v;
    }
    if let Some(v) = args.per_shot_latency_ms {
        dev.per_shot_latency_ms = v;
    }
    if dev.num_modes < 2 || dev.max_photons == 0 {
        return Err(CliError::Config("device needs at least 2 modes and 1 photon".into()));
    }
    let listener = bind(&dev.host, dev.port).await?;
    let device_id = dev.device_id.clone();
    let running = service::spawn_on(dev, listener).map_err(|e| CliError::Startup(e.to_string()))?;
    tracing::info!(url = %running.url(), device = %device_id, "qpu service listening");
    emit(format, &json!({"service": "qpu", "device_id": device_id, "url": running.url()}), || {
        format!("qpu {device_id} listening on {}", running.url())
    });
    wait_for_shutdown().await?;
    running.shutdown();
    Ok(())
}

pub async fn sched_serve(args: SchedServeArgs, cfg: FileConfig, format: Format) -> Result<(), CliError> {
    let mut sc = cfg.scheduler;
    if let Some(v) = args.host {
        sc.host = v;
    }
    if let Some(v) = args.port {
        sc.port = v;
    }
    if let Some(raw) = &args.qpu_endpoints {
        sc.qpu_endpoints = resolve_endpoints(&Some(raw.clone()), &FileConfig::default());
    }
    if let Some(v) = args.cpus {
        sc.cpu_slots = v;
    }
    if let Some(v) = args.gpus {
        sc.gpu_slots = v;
    }
    if let Some(v) = args.half_life {
        sc.half_life_s = v;
    }
    if !(sc.half_life_s.is_finite() && sc.half_life_s > 0.0) {
        return Err(CliError::Config(format!("half_life_s must be positive, got {}", sc.half_life_s)));
    }
    let listener = bind(&sc.host, sc.port).await?;
    let running = server::spawn_on(sc, Arc::new(BuiltinWorkloads), listener)
        .await
        .map_err(|e| CliError::Startup(e.to_string()))?;
    let status = running.handle.status();
    for q in status.qpus.iter().filter(|q| !q.up) {
        tracing::warn!(endpoint = %q.endpoint, "qpu endpoint unreachable, marked down");
    }
    emit(
        format,
        &json!({"service": "scheduler", "url": running.url(), "qpus": status.qpus}),
        || format!("scheduler listening on {} ({} QPUs, {} up)", running.url(), status.qpu_total, status.qpus.iter().filter(|q| q.up).count()),
    );
    wait_for_shutdown().await?;
    Ok(())
}

fn scheduler_url(flag: Option<String>, cfg: &FileConfig) -> String {
    flag.unwrap_or_else(|| cfg.client.scheduler_url.clone())
}

fn parse_params(raw: Option<&str>) -> Result<Value, CliError> {
    let Some(raw) = raw else { return Ok(Value::Null) };
    let text = match raw.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{path}: {e}")))?,
        None => raw.to_string(),
    };
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("workload parameters are not valid JSON: {e}")))
}

fn job_line(job: &BatchJob) -> String {
    let mut line = format!("{} {} owner={}", job.job_id, job.state.as_str(), job.owner);
    if let Some(g) = &job.granted {
        line += &format!(" cpus={} gpus={} qpus=[{}]", g.cpus, g.gpus, g.qpu_endpoints.join(","));
    }
    if let Some(e) = &job.error {
        line += &format!(" error={e}");
    }
    if let Some(out) = &job.output {
        line += &format!("\n{}", serde_json::to_string_pretty(out).unwrap_or_default());
    }
    line
}

pub async fn submit(args: SubmitArgs, cfg: FileConfig, format: Format) -> Result<(), CliError> {
    let params = parse_params(args.params.as_deref())?;
    let client = SchedulerClient::new(scheduler_url(args.scheduler, &cfg));
    let submission = BatchSubmission {
        owner: args.owner,
        request: ResourceRequest::new(args.cpus, args.gpus, args.qpus),
        workload: WorkloadSpec::new(args.workload, params),
    };
    let accepted = client.submit(&submission).await?;
    if !args.wait {
        emit(format, &accepted, || accepted.job_id.clone());
        return Ok(());
    }
    match format {
        Format::Human => println!("{}", accepted.job_id),
        Format::Json => eprintln!("{}", json!({"job_id": accepted.job_id, "state": accepted.state})),
    }
    let mut last = accepted.state;
    let job = loop {
        let job = client.job(&accepted.job_id).await?;
        if job.state != last {
            let line = json!({"job_id": job.job_id, "state": job.state});
            match format {
                Format::Human => println!("{} -> {}", last.as_str(), job.state.as_str()),
                Format::Json => eprintln!("{line}"),
            }
            last = job.state;
        }
        if job.state.is_terminal() {
            break job;
        }
        tokio::time::sleep(Duration::from_millis(args.poll_ms.max(1))).await;
    };
    emit(format, &job, || job_line(&job));
    match job.state {
        BatchState::Done => Ok(()),
        BatchState::Cancelled => Err(CliError::Failed(format!("job {} was cancelled", job.job_id))),
        _ => Err(CliError::Failed(format!("job {} failed: {}", job.job_id, job.error.as_deref().unwrap_or("unknown error")))),
    }
}

fn cluster_lines(st: &ClusterStatus) -> String {
    let mut out = format!(
        "cpus {}/{} free, gpus {}/{} free, qpus {}/{} free ({} held)",
        st.cpu_free, st.cpu_total, st.gpu_free, st.gpu_total, st.qpu_free, st.qpu_total, st.qpu_held
    );
    for q in &st.qpus {
        let health = if q.up { "up" } else { "down" };
        out += &format!("\n  {} {:?} {health} {}", q.endpoint, q.state, q.holder.as_deref().unwrap_or("-"));
    }
    for (label, jobs) in [("pending", &st.pending), ("running", &st.running)] {
        for j in jobs {
            out += &format!("\n  {label} {} owner={} priority={:.3}", j.job_id, j.owner, j.priority);
        }
    }
    out
}

pub async fn status(args: StatusArgs, cfg: FileConfig, format: Format) -> Result<(), CliError> {
    if let Some(endpoint) = args.endpoint {
        let client = QpuClient::from_urls([endpoint.clone()]);
        let st = client.status(&endpoint).await?;
        emit(format, &st, || {
            format!(
                "{} modes={} max_photons={} queue={} completed={} failed={} busy={}",
                st.device_id, st.num_modes, st.max_photons, st.queue_depth, st.jobs_completed, st.jobs_failed, st.busy
            )
        });
        return Ok(());
    }
    let client = SchedulerClient::new(scheduler_url(args.scheduler, &cfg));
    match args.job_id {
        Some(id) => {
            let job = client.job(&id).await?;
            emit(format, &job, || job_line(&job));
        }
        None => {
            let st = client.status().await?;
            emit(format, &st, || cluster_lines(&st));
        }
    }
    Ok(())
}

pub async fn cancel(args: CancelArgs, cfg: FileConfig, format: Format) -> Result<(), CliError> {
    let client = SchedulerClient::new(scheduler_url(args.scheduler, &cfg));
    let job = client.cancel(&args.job_id).await?;
    emit(format, &job, || job_line(&job));
    Ok(())
}

pub async fn sample(args: SampleArgs, cfg: FileConfig, format: Format) -> Result<(), CliError> {
    let endpoints = resolve_endpoints(&args.endpoints, &cfg);
    if endpoints.is_empty() {
        return Err(CliError::Config("no QPU endpoints given (use --endpoints, [client].endpoints or QPU_ENDPOINTS)".into()));
    }
    let input = FockState::new(args.input);
    let spec = if args.angles.is_empty() {
        CircuitSpec::identity(input, args.loops, args.shots)
    } else {
        CircuitSpec::new(input, args.loops, args.angles, args.shots)
    };
    let client = QpuClient::with_user(EndpointPool::new(endpoints), args.user);
    client.refresh_health().await;
    let policy = match args.split {
        SplitArg::Equal => SplitPolicy::Equal,
        SplitArg::AllToOne => SplitPolicy::AllToOne,
    };
    let res = client.sample_multi(&spec, &policy, args.seed).await?;
    let doc = json!({
        "total_shots": res.total_shots,
        "per_endpoint_shots": res.per_endpoint_shots,
        "wall_time_s": res.wall_time.as_secs_f64(),
        "histogram": res.histogram,
    });
    emit(format, &doc, || {
        let mut out = format!("{} shots in {:.3}s", res.total_shots, res.wall_time.as_secs_f64());
        for (ep, n) in &res.per_endpoint_shots {
            out += &format!("\n  {ep}: {n}");
        }
        for (state, n) in res.histogram.most_frequent(args.top) {
            out += &format!("\n{state} {n}");
        }
        out
    });
    Ok(())
}
