//! Hybrid classical-quantum algorithms driven through a [`SampleBackend`].

pub mod bbs;
pub mod dataset;
pub mod mlp;
pub mod ptlayer;
pub mod qnas;
pub mod qubo;
pub mod spsa;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::client::{ClientError, SampleBackend};
use crate::fock::{CircuitSpec, FockError, FockState, Histogram};

pub use bbs::{bbs_solve, outcome_to_bits, BbsConfig, BbsIteration, BbsState};
pub use dataset::Dataset;
pub use mlp::{train_mlp, MlpModel, TrainOutcome};
pub use ptlayer::PtLayer;
pub use qnas::{
    decode_genome, encode_genome, qnas_run, Activation, Architecture, EndpointGeneration, Individual, QnasConfig, QnasGeneration,
    QnasOutcome,
};
pub use qubo::{qubo_from_maxcut, Graph, QuboFile, QuboProblem, Tiling};

#[derive(Debug, Clone, thiserror::Error)]
pub enum AlgoError {
    #[error("invalid structure: {0}")]
    Structure(String),
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error("dataset: {0}")]
    Dataset(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for AlgoError {
    fn from(e: std::io::Error) -> Self {
        AlgoError::Io(e.to_string())
    }
}

/// Circuit layout of the target device.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeviceShape {
    pub num_modes: usize,
    pub loop_lengths: Vec<usize>,
    pub max_photons: u32,
}

impl Default for DeviceShape {
    fn default() -> Self {
        DeviceShape { num_modes: 8, loop_lengths: vec![1, 1], max_photons: 4 }
    }
}

impl DeviceShape {
    pub fn angle_count(&self) -> usize {
        crate::fock::angle_count(self.num_modes, &self.loop_lengths)
    }

    /// Single photons in alternating modes, up to the photon ceiling:
    /// `(1,0,1,0,1,0,1,0)` on the default device.
    pub fn alternating_input(&self) -> FockState {
        let occupied: Vec<usize> = (0..self.num_modes).step_by(2).take(self.max_photons as usize).collect();
        FockState::single_photons(self.num_modes, &occupied)
    }

    pub fn circuit(&self, angles: Vec<f64>, shots: u64) -> CircuitSpec {
        CircuitSpec::new(self.alternating_input(), self.loop_lengths.clone(), angles, shots)
    }
}

/// Samples on `preferred` (modulo the healthy set); on failure retries once
/// on a different healthy endpoint.
pub(crate) async fn sample_with_retry<B: SampleBackend>(
    backend: &B,
    preferred: usize,
    spec: &CircuitSpec,
    seed: u64,
) -> Result<Histogram, ClientError> {
    let up = backend.up_endpoints();
    if up.is_empty() {
        return Err(ClientError::NoCapacity);
    }
    let first = up[preferred % up.len()];
    match backend.sample_on(first, spec, seed).await {
        Ok(h) => Ok(h),
        Err(e @ ClientError::Rejected { .. }) => Err(e),
        Err(e) => {
            tracing::warn!(endpoint = first, error = %e, "sampling failed, retrying elsewhere");
            if matches!(e, ClientError::Transport { .. }) {
                backend.mark_down(first);
            }
            let others: Vec<usize> = backend.up_endpoints().into_iter().filter(|&i| i != first).collect();
            let Some(&next) = others.get(preferred % others.len().max(1)) else {
                return Err(e);
            };
            backend.sample_on(next, spec, seed).await.map_err(|e2| ClientError::PartialFailure {
                successful: Vec::new(),
                failed_shots: spec.n_samples,
                cause: Box::new(e2),
            })
        }
    }
}

/// Writes one JSON document per line.
pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), AlgoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for row in rows {
        serde_json::to_writer(&mut f, row).map_err(|e| AlgoError::Io(e.to_string()))?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}
