//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Run with `cargo test -p photonic-hpc-cli --test acceptance`.

use std::future::Future;
use std::net::SocketAddr;
use std::panic::AssertUnwindSafe;
use std::process::{Command, Stdio};
use std::sync::Arc;
use std::time::{Duration, Instant};

use photonic_hpc::algos::{bbs_solve, qnas_run, qubo_from_maxcut, BbsConfig, Dataset, DeviceShape, Graph, PtLayer, QnasConfig, Tiling};
use photonic_hpc::client::{estimate_observable, EndpointPool, LocalBackend, Observable, QpuClient, SplitPolicy};
use photonic_hpc::fock::{self, exact_distribution, permanent, CircuitSpec, Complex64, ComplexMatrix, FockState};
use photonic_hpc::scheduler::server::{self, BatchSubmission};
use photonic_hpc::scheduler::{check_event_log, BatchState, LicenseState, ResourceRequest, SchedulerConfig, WorkloadSpec};
use photonic_hpc::service::{self, DeviceConfig};
use photonic_hpc::workload::BuiltinWorkloads;
use photonic_hpc::SchedulerClient;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

type Verdict = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Verdict + 'a>);

fn loopback() -> SocketAddr {
    SocketAddr::from(([127, 0, 0, 1], 0))
}

fn ensure(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn naive_permanent(m: &ComplexMatrix) -> Complex64 {
    fn rec(m: &ComplexMatrix, row: usize, used: &mut Vec<bool>) -> Complex64 {
        if row == m.rows() {
            return Complex64::new(1.0, 0.0);
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for c in 0..m.cols() {
            if !used[c] {
                used[c] = true;
                acc += m.row(row)[c] * rec(m, row + 1, used);
                used[c] = false;
            }
        }
        acc
    }
    rec(m, 0, &mut vec![false; m.cols()])
}

fn c1_ryser_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let started = Instant::now();
    let mut worst: f64 = 0.0;
    for k in 0..500 {
        let n = 1 + k % 6;
        let rows = (0..n)
            .map(|_| (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect())
            .collect();
        let m = ComplexMatrix::from_rows(rows);
        let fast = permanent(&m).map_err(|e| e.to_string())?;
        let slow = naive_permanent(&m);
        let rel = (fast - slow).norm() / slow.norm().max(1e-300);
        worst = worst.max(rel);
    }
    let secs = started.elapsed().as_secs_f64();
    ensure(worst < 1e-9 && secs < 5.0, format!("500 matrices up to 6x6, max rel err {worst:.2e} (< 1e-9), {secs:.2}s (< 5s)"))
}

fn random_circuit(rng: &mut ChaCha8Rng) -> CircuitSpec {
    let modes = rng.gen_range(2..=8);
    let photons = rng.gen_range(1..=4u32);
    let mut occ = vec![0u32; modes];
    for _ in 0..photons {
        occ[rng.gen_range(0..modes)] += 1;
    }
    let n_loops = rng.gen_range(1..=3);
    let loops: Vec<usize> = (0..n_loops).map(|_| rng.gen_range(1..modes)).collect();
    let count = fock::angle_count(modes, &loops);
    let angles = (0..count).map(|_| rng.gen_range(-3.2..3.2)).collect();
    CircuitSpec::new(FockState::new(occ), loops, angles, 1)
}

fn c2_normalization() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let spec = random_circuit(&mut rng);
        let dist = exact_distribution(&spec).map_err(|e| e.to_string())?;
        worst = worst.max((dist.total_probability() - 1.0).abs());
    }
    ensure(worst <= 1e-9, format!("200 circuits (M <= 8, n <= 4), max |sum - 1| = {worst:.2e} (<= 1e-9)"))
}

fn c3_hong_ou_mandel() -> Verdict {
    let spec = CircuitSpec::new(FockState::new(vec![1, 1]), vec![1], vec![std::f64::consts::FRAC_PI_4], 10_000);
    let exact = exact_distribution(&spec).map_err(|e| e.to_string())?.probability(&FockState::new(vec![1, 1]));
    let hist = fock::sample(&spec, 3).map_err(|e| e.to_string())?;
    let hits = hist.count(&FockState::new(vec![1, 1]));
    ensure(
        exact.abs() <= 1e-12 && hits == 0 && hist.total() == 10_000,
        format!("exact P(1,1) = {exact:.1e} (<= 1e-12), {hits} coincidences in {} shots (= 0)", hist.total()),
    )
}

async fn c4_angle_count() -> Verdict {
    let dev = service::spawn(DeviceConfig::instant("c4"), loopback()).await.map_err(|e| e.to_string())?;
    let client = QpuClient::from_urls([dev.url()]);
    let input = FockState::single_photons(8, &[0, 2, 4, 6]);
    let expected = fock::angle_count(8, &[1, 1]);
    let mut codes = Vec::new();
    for n in [13, 14, 15] {
        let spec = CircuitSpec::new(input.clone(), vec![1, 1], vec![0.3; n], 10);
        codes.push(match client.submit(&dev.url(), &spec, Some(1)).await {
            Ok(_) => "accepted".to_string(),
            Err(e) => e.reject_code().unwrap_or("other").to_string(),
        });
    }
    ensure(
        expected == 14 && codes == ["ANGLE_COUNT", "accepted", "ANGLE_COUNT"],
        format!("8 modes, loops [1,1] need {expected} angles; 13/14/15 -> {}", codes.join("/")),
    )
}

async fn c5_fifo_and_exclusivity() -> Verdict {
    // device FIFO: 50 concurrent submitters, 10 jobs each
    let dev = service::spawn(DeviceConfig::instant("c5"), loopback()).await.map_err(|e| e.to_string())?;
    let url = dev.url();
    let spec = CircuitSpec::identity(FockState::single_photons(8, &[0, 2]), vec![1, 1], 5);
    let mut tasks = Vec::new();
    for user in 0..50u64 {
        let (url, spec) = (url.clone(), spec.clone());
        tasks.push(tokio::spawn(async move {
            let client = QpuClient::with_user(EndpointPool::new(vec![url.clone()]), format!("u{user}"));
            let mut rng = ChaCha8Rng::seed_from_u64(user);
            for _ in 0..10 {
                tokio::time::sleep(Duration::from_micros(rng.gen_range(0..500))).await;
                client.submit(&url, &spec, Some(user)).await.map_err(|e| e.to_string())?;
            }
            Ok::<_, String>(())
        }));
    }
    for t in tasks {
        t.await.map_err(|e| e.to_string())??;
    }
    let client = QpuClient::from_urls([url.clone()]);
    for j in dev.service.jobs() {
        client.wait(&url, &j.job_id).await.map_err(|e| e.to_string())?;
    }
    let mut jobs = dev.service.jobs();
    jobs.sort_by_key(|j| j.start_index);
    let fifo_violations = jobs.windows(2).filter(|w| w[0].accept_index >= w[1].accept_index).count()
        + jobs.iter().filter(|j| j.start_index.is_none()).count();

    // scheduler: 50 concurrent submitters, 10 randomized jobs each
    let devs = service::spawn_local_devices(2, &DeviceConfig::instant("c5q")).await.map_err(|e| e.to_string())?;
    let endpoints: Vec<String> = devs.iter().map(|d| d.url()).collect();
    let config = SchedulerConfig { qpu_endpoints: endpoints.clone(), tick_interval_ms: 5, ..SchedulerConfig::default() };
    let sched = server::spawn(config, Arc::new(BuiltinWorkloads), loopback()).await.map_err(|e| e.to_string())?;
    let surl = sched.url();
    let mut tasks = Vec::new();
    for user in 0..50u64 {
        let surl = surl.clone();
        tasks.push(tokio::spawn(async move {
            let client = SchedulerClient::new(surl);
            let mut rng = ChaCha8Rng::seed_from_u64(100 + user);
            let mut ids = Vec::new();
            for _ in 0..10 {
                let mut req = ResourceRequest::new(rng.gen_range(0..=3), rng.gen_range(0..=1), rng.gen_range(0..=2));
                if req.total_units() == 0 {
                    req.cpus = 1;
                }
                let params = json!({"seconds": rng.gen_range(0.0..0.004)});
                let sub = BatchSubmission {
                    owner: format!("user{}", user % 7),
                    request: req,
                    workload: WorkloadSpec::new("sleep", params),
                };
                ids.push(client.submit(&sub).await.map_err(|e| e.to_string())?.job_id);
            }
            Ok::<_, String>(ids)
        }));
    }
    let mut ids = Vec::new();
    for t in tasks {
        ids.extend(t.await.map_err(|e| e.to_string())??);
    }
    let client = SchedulerClient::new(surl);
    let deadline = Instant::now() + Duration::from_secs(120);
    for id in &ids {
        loop {
            let job = client.job(id).await.map_err(|e| e.to_string())?;
            if job.state.is_terminal() {
                if job.state != BatchState::Done {
                    return Err(format!("job {id} ended {:?}", job.state));
                }
                break;
            }
            if Instant::now() > deadline {
                return Err(format!("job {id} still {:?} after 120s", job.state));
            }
            tokio::time::sleep(Duration::from_millis(5)).await;
        }
    }
    let events = sched.handle.with_scheduler(|s| s.events().to_vec());
    let sched_ok = check_event_log(&events, 8, 2, &endpoints);
    let detail = format!(
        "device: {} jobs, {fifo_violations} FIFO violations; scheduler: {} jobs, {} events, {}",
        jobs.len(),
        ids.len(),
        events.len(),
        match &sched_ok {
            Ok(()) => "0 oversubscriptions".to_string(),
            Err(e) => format!("violation: {e}"),
        }
    );
    ensure(jobs.len() == 500 && fifo_violations == 0 && ids.len() == 500 && sched_ok.is_ok(), detail)
}

fn default_circuit(shots: u64) -> CircuitSpec {
    let shape = DeviceShape::default();
    let angles = (0..shape.angle_count()).map(|k| 0.05 + 0.2 * k as f64).collect();
    shape.circuit(angles, shots)
}

async fn c6_speedup() -> Verdict {
    let started = Instant::now();
    let template = DeviceConfig { base_latency_ms: 50.0, per_shot_latency_ms: 0.1, ..DeviceConfig::instant("c6") };
    let devs = service::spawn_local_devices(2, &template).await.map_err(|e| e.to_string())?;
    let spec = default_circuit(20_000);
    let one = QpuClient::from_urls([devs[0].url()]);
    let two = QpuClient::from_urls(devs.iter().map(|d| d.url()));
    let r1 = one.sample_multi(&spec, &SplitPolicy::AllToOne, 6).await.map_err(|e| e.to_string())?;
    let r2 = two.sample_multi(&spec, &SplitPolicy::Equal, 6).await.map_err(|e| e.to_string())?;
    let (t1, t2) = (r1.wall_time.as_secs_f64(), r2.wall_time.as_secs_f64());
    let total = started.elapsed().as_secs_f64();
    let ratio = t2 / t1;
    ensure(
        ratio <= 0.6 && total < 30.0 && r2.total_shots == 20_000,
        format!("1 QPU {t1:.3}s, 2 QPUs {t2:.3}s, ratio {ratio:.3} (<= 0.6), check took {total:.1}s (< 30s)"),
    )
}

fn std_dev(xs: &[f64]) -> f64 {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

async fn c7_variance() -> Verdict {
    // shots that fit a fixed budget under the default latency model
    let model = DeviceConfig::default();
    let budget_ms = 250.0;
    let per_endpoint = ((budget_ms - model.base_latency_ms) / model.per_shot_latency_ms).floor() as u64;
    if model.service_time(per_endpoint).as_secs_f64() * 1000.0 > budget_ms + 1e-9 {
        return Err("shot budget exceeds wall-clock budget".into());
    }
    let devs = service::spawn_local_devices(2, &DeviceConfig::instant("c7")).await.map_err(|e| e.to_string())?;
    let one = QpuClient::from_urls([devs[0].url()]);
    let two = QpuClient::from_urls(devs.iter().map(|d| d.url()));
    let obs = Observable::ModePhotons(0);
    let (mut se1, mut se2, mut m1, mut m2) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for t in 0..200u64 {
        let r1 = one.sample_multi(&default_circuit(per_endpoint), &SplitPolicy::AllToOne, 10_000 + t).await.map_err(|e| e.to_string())?;
        let r2 = two.sample_multi(&default_circuit(2 * per_endpoint), &SplitPolicy::Equal, 50_000 + 2 * t).await.map_err(|e| e.to_string())?;
        if r2.per_endpoint_shots.values().any(|&s| s != per_endpoint) {
            return Err(format!("2-QPU shards {:?} do not match the budget", r2.per_endpoint_shots));
        }
        let (a, sa) = estimate_observable(&r1, &obs).map_err(|e| e.to_string())?;
        let (b, sb) = estimate_observable(&r2, &obs).map_err(|e| e.to_string())?;
        m1.push(a);
        m2.push(b);
        se1.push(sa);
        se2.push(sb);
    }
    let target = std::f64::consts::FRAC_1_SQRT_2;
    let reported = se2.iter().sum::<f64>() / se1.iter().sum::<f64>();
    let empirical = std_dev(&m2) / std_dev(&m1);
    let within = |r: f64| (r / target - 1.0).abs() <= 0.15;
    ensure(
        within(reported) && within(empirical),
        format!(
            "{per_endpoint} shots/QPU in {budget_ms} ms; std_error ratio {reported:.4}, spread ratio over 200 trials {empirical:.4} (target {target:.4} +/- 15%)"
        ),
    )
}

async fn c8_bbs() -> Verdict {
    let started = Instant::now();
    let backend = LocalBackend::new(2);
    let mut exact_hits = 0;
    let mut iters_max = 0;
    for seed in 0..10u64 {
        let graph = Graph::random_regular3(12, seed);
        let problem = qubo_from_maxcut(&graph).map_err(|e| e.to_string())?;
        let config = BbsConfig { seed, max_iterations: 200, ..BbsConfig::default() };
        let state = bbs_solve(&problem, &Tiling::from_sizes(&[8, 4]), &backend, &config).await.map_err(|e| e.to_string())?;
        let optimum = graph.cut_value(&problem.brute_force().0);
        iters_max = iters_max.max(state.iteration);
        if (graph.cut_value(&state.best_assignment) - optimum).abs() < 1e-9 {
            exact_hits += 1;
        }
    }
    let mut wins = 0;
    for seed in 0..10u64 {
        let graph = Graph::random_regular3(30, 1000 + seed);
        let problem = qubo_from_maxcut(&graph).map_err(|e| e.to_string())?;
        let config = BbsConfig { seed, max_iterations: 200, ..BbsConfig::default() };
        let state =
            bbs_solve(&problem, &Tiling::contiguous(30, 8), &backend, &config).await.map_err(|e| e.to_string())?;
        let greedy = graph.cut_value(&problem.local_search(&[0; 30]).0);
        if graph.cut_value(&state.best_assignment) >= greedy - 1e-9 {
            wins += 1;
        }
    }
    let secs = started.elapsed().as_secs_f64();
    ensure(
        exact_hits >= 8 && wins >= 7 && iters_max <= 200 && secs < 300.0,
        format!("V=12 optimal on {exact_hits}/10 (>= 8, <= {iters_max} iterations); V=30 >= greedy on {wins}/10 (>= 7); {secs:.1}s (< 300s)"),
    )
}

fn c9_ptlayer_gradients() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut worst_step, mut worst_conservation): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        let modes = rng.gen_range(2..=8);
        let photons = rng.gen_range(1..=4.min(modes));
        let mut occupied: Vec<usize> = (0..modes).collect();
        for i in 0..photons {
            let j = rng.gen_range(i..modes);
            occupied.swap(i, j);
        }
        occupied.truncate(photons);
        let loops: Vec<usize> = (0..rng.gen_range(1..=2)).map(|_| rng.gen_range(1..modes)).collect();
        let layer = PtLayer::new(FockState::single_photons(modes, &occupied), loops).map_err(|e| e.to_string())?;
        let n = layer.angle_count();
        let angles: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let inputs: Vec<f64> = (0..rng.gen_range(0..=n)).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let upstream: Vec<f64> = (0..modes).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g3 = layer.grad_with_step(&angles, &inputs, &upstream, 1e-3).map_err(|e| e.to_string())?;
        let g5 = layer.grad_with_step(&angles, &inputs, &upstream, 1e-5).map_err(|e| e.to_string())?;
        for (a, b) in g3.iter().zip(&g5) {
            worst_step = worst_step.max((a - b).abs());
        }
        let ones = vec![1.0; modes];
        for g in layer.grad(&angles, &inputs, &ones).map_err(|e| e.to_string())? {
            worst_conservation = worst_conservation.max(g.abs());
        }
    }
    ensure(
        worst_step <= 1e-4 && worst_conservation <= 1e-10,
        format!("100 configurations: max |g(1e-3) - g(1e-5)| = {worst_step:.2e} (<= 1e-4), max |d sum / d theta| = {worst_conservation:.2e} (<= 1e-10)"),
    )
}

async fn c10_qnas_trend() -> Verdict {
    let started = Instant::now();
    let data = Dataset::iris();
    let backend = LocalBackend::new(2);
    let mut ok = 0;
    let mut worst_margin = f64::INFINITY;
    for seed in 0..10u64 {
        let config = QnasConfig { seed, population_per_qpu: 5, generations: 15, ..QnasConfig::default() };
        let out = qnas_run(&backend, &data, &config).await.map_err(|e| e.to_string())?;
        let initial = out.history.first().map(|g| g.mean_fitness).ok_or("empty history")?;
        let margin = out.best.fitness - initial;
        worst_margin = worst_margin.min(margin);
        if margin >= 0.0 && out.history.len() == 15 {
            ok += 1;
        }
    }
    let secs = started.elapsed().as_secs_f64();
    ensure(
        ok >= 9 && secs < 600.0,
        format!("final best >= generation-0 mean on {ok}/10 (>= 9), smallest margin {worst_margin:+.4}, {secs:.1}s (< 600s)"),
    )
}

async fn c11_end_to_end() -> Verdict {
    let devs = service::spawn_local_devices(2, &DeviceConfig::instant("c11")).await.map_err(|e| e.to_string())?;
    let config = SchedulerConfig { qpu_endpoints: devs.iter().map(|d| d.url()).collect(), tick_interval_ms: 20, ..SchedulerConfig::default() };
    let sched = server::spawn(config, Arc::new(BuiltinWorkloads), loopback()).await.map_err(|e| e.to_string())?;
    let client = SchedulerClient::new(sched.url());
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let history = dir.path().join("qnas-history.jsonl");

    let before = client.status().await.map_err(|e| e.to_string())?;
    let params = json!({"seed": 11, "history_path": history}).to_string();
    let child = Command::new(env!("CARGO_BIN_EXE_hqc"))
        .args(["--format", "json", "submit", "--scheduler", &sched.url(), "--owner", "alice", "--cpus", "1", "--qpus", "2"])
        .args(["--workload", "qnas", "--params", &params, "--wait", "--poll-ms", "50"])
        .env_remove("QPU_ENDPOINTS")
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| e.to_string())?;
    let waiter = tokio::task::spawn_blocking(move || child.wait_with_output());

    let mut during = None;
    let deadline = Instant::now() + Duration::from_secs(300);
    while during.is_none() && !waiter.is_finished() && Instant::now() < deadline {
        let st = client.status().await.map_err(|e| e.to_string())?;
        if !st.running.is_empty() {
            during = Some(st);
        }
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
    let output = waiter.await.map_err(|e| e.to_string())?.map_err(|e| e.to_string())?;
    let after = client.status().await.map_err(|e| e.to_string())?;
    let job: Value = serde_json::from_slice(&output.stdout).map_err(|e| format!("submit output: {e}"))?;
    let job_id = job["job_id"].as_str().unwrap_or_default().to_string();

    let during = during.ok_or("never observed the job running")?;
    let held_by_job = during
        .qpus
        .iter()
        .filter(|q| q.state == LicenseState::Held && q.holder.as_deref() == Some(job_id.as_str()))
        .count();
    let lines: Vec<Value> = std::fs::read_to_string(&history)
        .map_err(|e| format!("history file: {e}"))?
        .lines()
        .map(serde_json::from_str)
        .collect::<Result<_, _>>()
        .map_err(|e| format!("history line: {e}"))?;
    let generations = QnasConfig::default().generations;
    let complete = lines.len() == generations
        && lines.iter().enumerate().all(|(g, row)| {
            row["generation"] == g && row["endpoints"].as_array().map(|e| e.len()) == Some(2) && row["best_fitness"].is_number()
        });
    let ok = output.status.code() == Some(0)
        && job["state"] == "done"
        && (before.qpu_free, before.qpu_held) == (2, 0)
        && (during.qpu_free, during.qpu_held, held_by_job) == (0, 2, 2)
        && (after.qpu_free, after.qpu_held) == (2, 0)
        && after.running.is_empty()
        && complete;
    ensure(
        ok,
        format!(
            "exit {:?}, job {job_id} {}; qpu free/held before {}/{}, during {}/{} ({held_by_job} held by job), after {}/{}; history {} of {generations} generations",
            output.status.code(),
            job["state"],
            before.qpu_free,
            before.qpu_held,
            during.qpu_free,
            during.qpu_held,
            after.qpu_free,
            after.qpu_held,
            lines.len()
        ),
    )
}

fn main() {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().expect("runtime");
    let block = |f: std::pin::Pin<Box<dyn Future<Output = Verdict>>>| rt.block_on(f);
    let criteria: Vec<Criterion<'_>> = vec![
        ("1 Ryser permanent oracle", Box::new(c1_ryser_oracle)),
        ("2 distribution normalization", Box::new(c2_normalization)),
        ("3 Hong-Ou-Mandel", Box::new(c3_hong_ou_mandel)),
        ("4 angle count", Box::new(|| block(Box::pin(c4_angle_count())))),
        ("5 FIFO and exclusivity", Box::new(|| block(Box::pin(c5_fifo_and_exclusivity())))),
        ("6 two-QPU speedup", Box::new(|| block(Box::pin(c6_speedup())))),
        ("7 two-QPU variance", Box::new(|| block(Box::pin(c7_variance())))),
        ("8 BBS Max-Cut", Box::new(|| block(Box::pin(c8_bbs())))),
        ("9 PTLayer gradients", Box::new(c9_ptlayer_gradients)),
        ("10 QNAS trend", Box::new(|| block(Box::pin(c10_qnas_trend())))),
        ("11 end-to-end scheduled QNAS", Box::new(|| block(Box::pin(c11_end_to_end())))),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in &criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let verdict = std::panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match verdict {
            Ok(detail) => println!("PASS [{name}] {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{name}] {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
