//! Seeded end-to-end experiments. Each writes `<name>.jsonl` and
//! `<name>-summary.json` under the output directory and fails with
//! [`CliError::AcceptanceMiss`] when its check does not hold.

use std::path::{Path, PathBuf};
use std::time::Instant;

use photonic_hpc::algos::{bbs_solve, qnas_run, qubo_from_maxcut, write_jsonl, BbsConfig, Dataset, DeviceShape, Graph, QnasConfig, Tiling};
use photonic_hpc::client::{EndpointPool, QpuClient, SplitPolicy};
use photonic_hpc::fock::FockState;
use photonic_hpc::service::{self, DeviceConfig, RunningService};
use photonic_hpc::workload::hom_circuit;
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::{Demo, DemoArgs};
use crate::config::{resolve_endpoints, FileConfig};
use crate::error::CliError;
use crate::output::{emit, Format};

const DEMO_USER: &str = "demo";

/// Devices a demo talks to. In-process services stay alive as long as this does.
struct Devices {
    _local: Vec<RunningService>,
    urls: Vec<String>,
}

impl Devices {
    async fn obtain(args: &DemoArgs, cfg: &FileConfig, count: usize, template: &DeviceConfig) -> Result<Self, CliError> {
        if args.self_contained {
            let local = service::spawn_local_devices(count, template)
                .await
                .map_err(|e| CliError::Startup(format!("cannot start in-process devices: {e}")))?;
            let urls = local.iter().map(|d| d.url()).collect();
            return Ok(Devices { _local: local, urls });
        }
        let urls = resolve_endpoints(&args.endpoints, cfg);
        if urls.len() < count {
            return Err(CliError::Config(format!(
                "demo needs {count} QPU endpoint(s), {} configured; pass --endpoints or --self-contained",
                urls.len()
            )));
        }
        Ok(Devices { _local: Vec::new(), urls: urls.into_iter().take(count).collect() })
    }

    async fn client(&self, urls: &[String]) -> Result<QpuClient, CliError> {
        let client = QpuClient::with_user(EndpointPool::new(urls.to_vec()), DEMO_USER);
        let health = client.refresh_health().await;
        if health.iter().all(|h| *h != photonic_hpc::client::Health::Up) {
            return Err(CliError::Failed(format!("no reachable QPU among {}", urls.join(","))));
        }
        Ok(client)
    }
}

fn write_summary(dir: &Path, name: &str, summary: &Value) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Failed(format!("{}: {e}", dir.display())))?;
    let path = dir.join(format!("{name}-summary.json"));
    let text = serde_json::to_string_pretty(summary).expect("summary serialises");
    std::fs::write(&path, text).map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))?;
    Ok(path)
}

fn write_log<T: Serialize>(dir: &Path, name: &str, rows: &[T]) -> Result<PathBuf, CliError> {
    let path = dir.join(format!("{name}.jsonl"));
    write_jsonl(&path, rows).map_err(|e| CliError::Failed(e.to_string()))?;
    Ok(path)
}

struct Report {
    name: &'static str,
    passed: bool,
    check: String,
    summary: Value,
}

fn finish(report: Report, dir: &Path, format: Format) -> Result<(), CliError> {
    let mut summary = report.summary;
    summary["demo"] = json!(report.name);
    summary["check"] = json!(report.check);
    summary["passed"] = json!(report.passed);
    let path = write_summary(dir, report.name, &summary)?;
    summary["summary_path"] = json!(path);
    emit(format, &summary, || {
        let verdict = if report.passed { "PASS" } else { "MISS" };
        format!("{} {verdict}: {}\nsummary: {}", report.name, report.check, path.display())
    });
    if report.passed {
        Ok(())
    } else {
        Err(CliError::AcceptanceMiss(format!("{}: {}", report.name, report.check)))
    }
}

pub async fn run(args: DemoArgs, cfg: FileConfig, format: Format) -> Result<(), CliError> {
    let report = match &args.demo {
        Demo::Hom { shots } => hom(&args, &cfg, *shots).await?,
        Demo::Speedup { shots, base_latency_ms, per_shot_latency_ms } => {
            speedup(&args, &cfg, *shots, *base_latency_ms, *per_shot_latency_ms).await?
        }
        Demo::Bbs { graph, tiles, max_iterations, shots_per_step } => {
            bbs(&args, &cfg, graph, tiles.as_deref(), *max_iterations, *shots_per_step).await?
        }
        Demo::Qnas { generations, population_per_qpu, epochs, shots } => {
            let mut qc = QnasConfig { seed: args.seed, ..QnasConfig::default() };
            qc.generations = generations.unwrap_or(qc.generations);
            qc.population_per_qpu = population_per_qpu.unwrap_or(qc.population_per_qpu);
            qc.epochs = epochs.unwrap_or(qc.epochs);
            qc.shots = shots.unwrap_or(qc.shots);
            qnas(&args, &cfg, qc).await?
        }
    };
    finish(report, &args.out, format)
}

async fn hom(args: &DemoArgs, cfg: &FileConfig, shots: u64) -> Result<Report, CliError> {
    let devices = Devices::obtain(args, cfg, 1, &DeviceConfig::instant("hom")).await?;
    let client = devices.client(&devices.urls).await?;
    let modes = client.status(&devices.urls[0]).await?.num_modes;
    let res = client.sample_multi(&hom_circuit(modes, shots), &SplitPolicy::AllToOne, args.seed).await?;
    let coincidence = FockState::single_photons(modes, &[0, 1]);
    let p11 = res.histogram.count(&coincidence) as f64 / res.total_shots.max(1) as f64;
    let rows: Vec<Value> = res.histogram.iter().map(|(s, n)| json!({"outcome": s, "count": n})).collect();
    let log = write_log(&args.out, "hom", &rows)?;
    Ok(Report {
        name: "hom",
        passed: p11 < 0.01,
        check: format!("P(1,1) = {p11:.5} over {} shots, expected < 0.01", res.total_shots),
        summary: json!({"shots": res.total_shots, "p11": p11, "seed": args.seed, "log_path": log}),
    })
}

async fn speedup(args: &DemoArgs, cfg: &FileConfig, shots: u64, base: f64, per_shot: f64) -> Result<Report, CliError> {
    let template = DeviceConfig { base_latency_ms: base, per_shot_latency_ms: per_shot, ..DeviceConfig::instant("speedup") };
    let devices = Devices::obtain(args, cfg, 2, &template).await?;
    let shape = DeviceShape::default();
    let angles: Vec<f64> = (0..shape.angle_count()).map(|k| 0.05 + 0.2 * k as f64).collect();
    let spec = shape.circuit(angles, shots);

    let single = devices.client(&devices.urls[..1]).await?;
    let one = single.sample_multi(&spec, &SplitPolicy::AllToOne, args.seed).await?;
    let pair = devices.client(&devices.urls).await?;
    let two = pair.sample_multi(&spec, &SplitPolicy::Equal, args.seed).await?;
    let (t1, t2) = (one.wall_time.as_secs_f64(), two.wall_time.as_secs_f64());
    let ratio = t2 / t1;
    let rows = vec![
        json!({"qpus": 1, "shots": one.total_shots, "wall_time_s": t1, "per_endpoint_shots": one.per_endpoint_shots}),
        json!({"qpus": 2, "shots": two.total_shots, "wall_time_s": t2, "per_endpoint_shots": two.per_endpoint_shots}),
    ];
    let log = write_log(&args.out, "speedup", &rows)?;
    Ok(Report {
        name: "speedup",
        passed: ratio <= 0.6,
        check: format!("2-QPU wall time {t2:.3}s / 1-QPU {t1:.3}s = {ratio:.3}, expected <= 0.6"),
        summary: json!({"shots": shots, "one_qpu_s": t1, "two_qpu_s": t2, "ratio": ratio, "log_path": log}),
    })
}

/// `k3`, `k<N>`, `p<N>`, `regular:N[:SEED]`, or a JSON graph file.
pub fn parse_graph(raw: &str, seed: u64) -> Result<Graph, CliError> {
    let bad = |why: &str| CliError::Config(format!("bad --graph {raw:?}: {why}"));
    if let Some(rest) = raw.strip_prefix("regular:") {
        let mut parts = rest.split(':');
        let n: usize = parts.next().unwrap_or("").parse().map_err(|_| bad("node count"))?;
        let s = match parts.next() {
            Some(p) => p.parse().map_err(|_| bad("seed"))?,
            None => seed,
        };
        if n < 4 || n % 2 == 1 {
            return Err(bad("3-regular graphs need an even node count >= 4"));
        }
        return Ok(Graph::random_regular3(n, s));
    }
    for (prefix, build) in [("k", Graph::complete as fn(usize) -> Graph), ("p", Graph::path)] {
        if let Some(n) = raw.strip_prefix(prefix).and_then(|n| n.parse::<usize>().ok()) {
            if n < 2 {
                return Err(bad("need at least 2 nodes"));
            }
            return Ok(build(n));
        }
    }
    let text = std::fs::read_to_string(raw).map_err(|e| bad(&e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| bad(&e.to_string()))
}

/// Largest instance solved exactly for the reference cut.
const BRUTE_FORCE_MAX: usize = 20;

async fn bbs(
    args: &DemoArgs,
    cfg: &FileConfig,
    graph_arg: &str,
    tiles: Option<&[usize]>,
    max_iterations: Option<usize>,
    shots_per_step: Option<u64>,
) -> Result<Report, CliError> {
    let graph = parse_graph(graph_arg, args.seed)?;
    let problem = qubo_from_maxcut(&graph)?;
    let mut config = BbsConfig { seed: args.seed, ..BbsConfig::default() };
    config.max_iterations = max_iterations.unwrap_or(config.max_iterations);
    config.shots_per_step = shots_per_step.unwrap_or(config.shots_per_step);
    let tiling = match tiles {
        Some(sizes) => Tiling::from_sizes(sizes),
        None => Tiling::contiguous(problem.size(), config.device.num_modes),
    };
    let devices = Devices::obtain(args, cfg, 2, &DeviceConfig::instant("bbs")).await?;
    let client = devices.client(&devices.urls).await?;
    let started = Instant::now();
    let state = bbs_solve(&problem, &tiling, &client, &config).await?;
    let elapsed = started.elapsed().as_secs_f64();
    let log = write_log(&args.out, "bbs", &state.history)?;
    let cut = graph.cut_value(&state.best_assignment);
    let (reference, method) = if problem.size() <= BRUTE_FORCE_MAX {
        (graph.cut_value(&problem.brute_force().0), "brute force")
    } else {
        (graph.cut_value(&problem.local_search(&vec![0; problem.size()]).0), "greedy local search")
    };
    Ok(Report {
        name: "bbs",
        passed: cut >= reference - 1e-9,
        check: format!("best cut {cut} after {} iterations, expected >= {reference} ({method})", state.iteration),
        summary: json!({
            "graph": graph_arg,
            "nodes": graph.num_nodes,
            "tiles": tiling.sizes(),
            "best_cut": cut,
            "reference_cut": reference,
            "reference": method,
            "best_assignment": state.best_assignment,
            "iterations": state.iteration,
            "wall_time_s": elapsed,
            "seed": args.seed,
            "log_path": log,
        }),
    })
}

async fn qnas(args: &DemoArgs, cfg: &FileConfig, config: QnasConfig) -> Result<Report, CliError> {
    let devices = Devices::obtain(args, cfg, 2, &DeviceConfig::instant("qnas")).await?;
    let client = devices.client(&devices.urls).await?;
    let data = Dataset::iris();
    let started = Instant::now();
    let out = qnas_run(&client, &data, &config).await?;
    let elapsed = started.elapsed().as_secs_f64();
    let log = write_log(&args.out, "qnas", &out.history)?;
    let initial = out.history.first().map(|g| g.mean_fitness).unwrap_or(0.0);
    let best = out.best.fitness;
    Ok(Report {
        name: "qnas",
        passed: best >= initial,
        check: format!("final best fitness {best:.4}, expected >= generation-0 mean {initial:.4}"),
        summary: json!({
            "generations": out.history.len(),
            "initial_mean_fitness": initial,
            "best_fitness": best,
            "best_genome": out.best.genome,
            "best_architecture": out.best.architecture.to_string(),
            "wall_time_s": elapsed,
            "seed": args.seed,
            "log_path": log,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph_shorthands() {
        assert_eq!(parse_graph("k3", 0).unwrap().edges.len(), 3);
        assert_eq!(parse_graph("p4", 0).unwrap().edges.len(), 3);
        let g = parse_graph("regular:12:5", 0).unwrap();
        assert_eq!((g.num_nodes, g.edges.len()), (12, 18));
        assert_eq!(parse_graph("regular:12", 5).unwrap(), g);
        assert!(matches!(parse_graph("regular:7", 0), Err(CliError::Config(_))));
        assert!(parse_graph("k1", 0).is_err());
        assert!(parse_graph("/no/such/graph.json", 0).is_err());
    }
}
