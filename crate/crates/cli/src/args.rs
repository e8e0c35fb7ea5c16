use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::output::Format;

/// Simulated photonic QPU cluster: device services, a license-counting
/// scheduler, and hybrid algorithm demos.
#[derive(Debug, Parser)]
#[command(name = "hqc", version)]
pub struct Cli {
    /// TOML config file with [qpu], [scheduler] and [client] sections.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value = "human")]
    pub format: Format,

    /// Raise log verbosity (repeatable). Logs go to stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Serve one QPU device over HTTP until interrupted.
    QpuServe(QpuServeArgs),
    /// Serve the batch scheduler over HTTP until interrupted.
    SchedServe(SchedServeArgs),
    /// Submit a batch job to the scheduler.
    Submit(SubmitArgs),
    /// Show cluster status, one batch job, or one device.
    Status(StatusArgs),
    /// Cancel a pending or running batch job.
    Cancel(CancelArgs),
    /// Sample a circuit directly on one or more devices.
    Sample(SampleArgs),
    /// Run a seeded demonstration experiment and check its outcome.
    Demo(DemoArgs),
}

#[derive(Debug, Args)]
pub struct QpuServeArgs {
    #[arg(long)]
    pub host: Option<String>,
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long)]
    pub device_id: Option<String>,
    #[arg(long)]
    pub modes: Option<usize>,
    #[arg(long)]
    pub max_photons: Option<u32>,
    #[arg(long, value_name = "MS")]
    pub base_latency_ms: Option<f64>,
    #[arg(long, value_name = "MS")]
    pub per_shot_latency_ms: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SchedServeArgs {
    #[arg(long)]
    pub host: Option<String>,
    #[arg(long)]
    pub port: Option<u16>,
    /// Comma-separated QPU endpoint URLs.
    #[arg(long, value_name = "URLS")]
    pub qpu_endpoints: Option<String>,
    #[arg(long)]
    pub cpus: Option<u32>,
    #[arg(long)]
    pub gpus: Option<u32>,
    #[arg(long, value_name = "SECONDS")]
    pub half_life: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SubmitArgs {
    #[arg(long, value_name = "URL")]
    pub scheduler: Option<String>,
    #[arg(long, default_value = "default")]
    pub owner: String,
    #[arg(long, default_value_t = 1)]
    pub cpus: u32,
    #[arg(long, default_value_t = 0)]
    pub gpus: u32,
    #[arg(long, default_value_t = 0)]
    pub qpus: u32,
    /// One of sleep, sample, hom, bbs, qnas.
    #[arg(long)]
    pub workload: String,
    /// Workload parameters as inline JSON or `@path`.
    #[arg(long, value_name = "JSON")]
    pub params: Option<String>,
    /// Follow the job until it finishes.
    #[arg(long)]
    pub wait: bool,
    #[arg(long, default_value_t = 200, value_name = "MS")]
    pub poll_ms: u64,
}

#[derive(Debug, Args)]
pub struct StatusArgs {
    #[arg(long, value_name = "URL")]
    pub scheduler: Option<String>,
    /// Query a device instead of the scheduler.
    #[arg(long, value_name = "URL", conflicts_with = "job_id")]
    pub endpoint: Option<String>,
    pub job_id: Option<String>,
}

#[derive(Debug, Args)]
pub struct CancelArgs {
    #[arg(long, value_name = "URL")]
    pub scheduler: Option<String>,
    pub job_id: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Equal,
    AllToOne,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Comma-separated device URLs (falls back to config and QPU_ENDPOINTS).
    #[arg(long, value_name = "URLS")]
    pub endpoints: Option<String>,
    /// Occupation numbers, e.g. `1,0,1,0,1,0,1,0`.
    #[arg(long, value_delimiter = ',', required = true)]
    pub input: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_value = "1,1")]
    pub loops: Vec<usize>,
    /// Coupler angles in radians; all zero when omitted.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub angles: Vec<f64>,
    #[arg(long, default_value_t = 1000)]
    pub shots: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "equal")]
    pub split: SplitArg,
    #[arg(long, default_value = "cli")]
    pub user: String,
    /// Number of most frequent outcomes shown in human output.
    #[arg(long, default_value_t = 10)]
    pub top: usize,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    #[command(subcommand)]
    pub demo: Demo,
    /// Start in-process devices instead of using configured endpoints.
    #[arg(long, global = true)]
    pub self_contained: bool,
    #[arg(long, global = true, value_name = "URLS")]
    pub endpoints: Option<String>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Directory for logs and the summary.
    #[arg(long, global = true, default_value = "demo-out", value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Demo {
    /// Two-photon interference on a balanced coupler.
    Hom {
        #[arg(long, default_value_t = 10_000)]
        shots: u64,
    },
    /// Wall time of one shot budget on one device versus two.
    Speedup {
        #[arg(long, default_value_t = 20_000)]
        shots: u64,
        #[arg(long, default_value_t = 50.0, value_name = "MS")]
        base_latency_ms: f64,
        #[arg(long, default_value_t = 0.1, value_name = "MS")]
        per_shot_latency_ms: f64,
    },
    /// Max-Cut with the binary bosonic solver.
    Bbs {
        /// `k3`, `k<N>`, `p<N>`, `regular:N[:SEED]` or a JSON graph file.
        #[arg(long, default_value = "regular:12")]
        graph: String,
        #[arg(long, value_delimiter = ',')]
        tiles: Option<Vec<usize>>,
        #[arg(long)]
        max_iterations: Option<usize>,
        #[arg(long)]
        shots_per_step: Option<u64>,
    },
    /// Architecture search for an Iris classifier.
    Qnas {
        #[arg(long)]
        generations: Option<usize>,
        #[arg(long)]
        population_per_qpu: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        shots: Option<u64>,
    },
}
