//! Workloads the scheduler can run inside a granted allocation.

use std::future::Future;
use std::path::PathBuf;
use std::pin::Pin;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::algos::{
    bbs_solve, qnas_run, qubo_from_maxcut, write_jsonl, BbsConfig, Dataset, Graph, QnasConfig, QuboFile, QuboProblem, Tiling,
};
use crate::client::{EndpointPool, QpuClient, SplitPolicy};
use crate::fock::{CircuitSpec, FockState};
use crate::scheduler::{Allocation, WorkloadSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkloadContext {
    pub job_id: String,
    pub owner: String,
    pub allocation: Allocation,
}

impl WorkloadContext {
    /// Client over the granted QPU endpoints, acting as the job owner.
    pub fn client(&self) -> QpuClient {
        QpuClient::with_user(EndpointPool::new(self.allocation.qpu_endpoints.clone()), self.owner.clone())
    }
}

pub type WorkloadFuture = Pin<Box<dyn Future<Output = Result<Value, String>> + Send + 'static>>;

pub trait WorkloadRunner: Send + Sync + 'static {
    fn workload_names(&self) -> Vec<String>;
    fn run(&self, spec: WorkloadSpec, ctx: WorkloadContext) -> WorkloadFuture;
}

/// `sleep`, `sample`, `hom`, `bbs` and `qnas`.
#[derive(Clone, Debug, Default)]
pub struct BuiltinWorkloads;

pub const BUILTIN_WORKLOADS: [&str; 5] = ["sleep", "sample", "hom", "bbs", "qnas"];

fn params<T: DeserializeOwned>(v: Value) -> Result<T, String> {
    let v = if v.is_null() { json!({}) } else { v };
    serde_json::from_value(v).map_err(|e| format!("bad workload parameters: {e}"))
}

fn require_qpus(ctx: &WorkloadContext) -> Result<(), String> {
    if ctx.allocation.qpu_endpoints.is_empty() {
        Err("workload needs at least one QPU".into())
    } else {
        Ok(())
    }
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SleepParams {
    seconds: f64,
    fail: bool,
}

impl Default for SleepParams {
    fn default() -> Self {
        SleepParams { seconds: 1.0, fail: false }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleParams {
    input_state: FockState,
    #[serde(default = "default_loops")]
    loop_lengths: Vec<usize>,
    bs_angles: Vec<f64>,
    n_samples: u64,
    #[serde(default)]
    seed: u64,
}

fn default_loops() -> Vec<usize> {
    vec![1, 1]
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct HomParams {
    shots: u64,
    seed: u64,
}

impl Default for HomParams {
    fn default() -> Self {
        HomParams { shots: 10_000, seed: 0 }
    }
}

/// Problem description accepted by the `bbs` workload.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemInput {
    Maxcut(Graph),
    RandomRegular3 { nodes: usize, seed: u64 },
    Qubo(QuboFile),
}

impl ProblemInput {
    pub fn build(&self) -> Result<QuboProblem, String> {
        match self {
            ProblemInput::Maxcut(g) => qubo_from_maxcut(g).map_err(|e| e.to_string()),
            ProblemInput::RandomRegular3 { nodes, seed } => {
                if *nodes < 4 || nodes % 2 == 1 {
                    return Err(format!("3-regular graph needs an even node count >= 4, got {nodes}"));
                }
                qubo_from_maxcut(&Graph::random_regular3(*nodes, *seed)).map_err(|e| e.to_string())
            }
            ProblemInput::Qubo(f) => QuboProblem::from_file(f).map_err(|e| e.to_string()),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BbsParams {
    problem: ProblemInput,
    /// Tile sizes; contiguous blocks of the device width when absent.
    #[serde(default)]
    tiles: Option<Vec<usize>>,
    #[serde(default)]
    max_iterations: Option<usize>,
    #[serde(default)]
    patience: Option<usize>,
    #[serde(default)]
    shots_per_step: Option<u64>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    log_path: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct QnasParams {
    generations: usize,
    population_per_qpu: usize,
    epochs: usize,
    shots: u64,
    seed: u64,
    history_path: Option<PathBuf>,
}

impl Default for QnasParams {
    fn default() -> Self {
        let d = QnasConfig::default();
        QnasParams {
            generations: d.generations,
            population_per_qpu: d.population_per_qpu,
            epochs: d.epochs,
            shots: d.shots,
            seed: d.seed,
            history_path: None,
        }
    }
}

async fn run_sleep(p: SleepParams) -> Result<Value, String> {
    if !(p.seconds.is_finite() && p.seconds >= 0.0) {
        return Err(format!("invalid sleep duration {}", p.seconds));
    }
    tokio::time::sleep(Duration::from_secs_f64(p.seconds)).await;
    if p.fail {
        return Err("sleep workload asked to fail".into());
    }
    Ok(json!({ "slept_s": p.seconds }))
}

async fn run_sample(p: SampleParams, ctx: WorkloadContext) -> Result<Value, String> {
    require_qpus(&ctx)?;
    let spec = CircuitSpec::new(p.input_state, p.loop_lengths, p.bs_angles, p.n_samples);
    let res = ctx.client().sample_multi(&spec, &SplitPolicy::Equal, p.seed).await.map_err(|e| e.to_string())?;
    Ok(json!({
        "total_shots": res.total_shots,
        "per_endpoint_shots": res.per_endpoint_shots,
        "wall_time_s": res.wall_time.as_secs_f64(),
        "histogram": res.histogram,
    }))
}

/// Photons in modes 0 and 1 meeting on a balanced coupler; every other
/// coupler is left at zero.
pub fn hom_circuit(modes: usize, shots: u64) -> CircuitSpec {
    let mut angles = vec![0.0; modes - 1];
    angles[0] = std::f64::consts::FRAC_PI_4;
    CircuitSpec::new(FockState::single_photons(modes, &[0, 1]), vec![1], angles, shots)
}

async fn run_hom(p: HomParams, ctx: WorkloadContext) -> Result<Value, String> {
    require_qpus(&ctx)?;
    let client = ctx.client();
    let modes = client.status(&ctx.allocation.qpu_endpoints[0]).await.map_err(|e| e.to_string())?.num_modes;
    let spec = hom_circuit(modes, p.shots);
    let res = client.sample_multi(&spec, &SplitPolicy::Equal, p.seed).await.map_err(|e| e.to_string())?;
    let coincidences = res.histogram.count(&FockState::single_photons(modes, &[0, 1]));
    Ok(json!({
        "shots": res.total_shots,
        "coincidences": coincidences,
        "coincidence_rate": coincidences as f64 / res.total_shots as f64,
    }))
}

async fn run_bbs(p: BbsParams, ctx: WorkloadContext) -> Result<Value, String> {
    require_qpus(&ctx)?;
    let problem = p.problem.build()?;
    let mut config = BbsConfig::default();
    let o = &p;
    config.max_iterations = o.max_iterations.unwrap_or(config.max_iterations);
    config.patience = o.patience.unwrap_or(config.patience);
    config.shots_per_step = o.shots_per_step.unwrap_or(config.shots_per_step);
    config.seed = o.seed.unwrap_or(config.seed);
    let tiling = match p.tiles {
        Some(sizes) => Tiling::from_sizes(&sizes),
        None => Tiling::contiguous(problem.size(), config.device.num_modes),
    };
    let state = bbs_solve(&problem, &tiling, &ctx.client(), &config).await.map_err(|e| e.to_string())?;
    if let Some(path) = &p.log_path {
        write_jsonl(path, &state.history).map_err(|e| e.to_string())?;
    }
    Ok(json!({
        "best_energy": state.best_energy,
        "best_assignment": state.best_assignment,
        "iterations": state.iteration,
        "log_path": p.log_path,
    }))
}

async fn run_qnas(p: QnasParams, ctx: WorkloadContext) -> Result<Value, String> {
    require_qpus(&ctx)?;
    let config = QnasConfig {
        generations: p.generations,
        population_per_qpu: p.population_per_qpu,
        epochs: p.epochs,
        shots: p.shots,
        seed: p.seed,
        ..QnasConfig::default()
    };
    let data = Dataset::iris();
    let out = qnas_run(&ctx.client(), &data, &config).await.map_err(|e| e.to_string())?;
    if let Some(path) = &p.history_path {
        write_jsonl(path, &out.history).map_err(|e| e.to_string())?;
    }
    Ok(json!({
        "generations": out.history.len(),
        "best_fitness": out.best.fitness,
        "best_genome": out.best.genome,
        "best_architecture": out.best.architecture.to_string(),
        "initial_mean_fitness": out.history.first().map(|g| g.mean_fitness),
        "history_path": p.history_path,
    }))
}

impl WorkloadRunner for BuiltinWorkloads {
    fn workload_names(&self) -> Vec<String> {
        BUILTIN_WORKLOADS.iter().map(|s| s.to_string()).collect()
    }

    fn run(&self, spec: WorkloadSpec, ctx: WorkloadContext) -> WorkloadFuture {
        let WorkloadSpec { name, params: raw } = spec;
        Box::pin(async move {
            match name.as_str() {
                "sleep" => run_sleep(params(raw)?).await,
                "sample" => run_sample(params(raw)?, ctx).await,
                "hom" => run_hom(params(raw)?, ctx).await,
                "bbs" => run_bbs(params(raw)?, ctx).await,
                "qnas" => run_qnas(params(raw)?, ctx).await,
                other => Err(format!("unknown workload {other:?}")),
            }
        })
    }
}
