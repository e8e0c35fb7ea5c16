use std::future::Future;

use super::{ClientError, Health, QpuClient};
use crate::fock::{self, CircuitSpec, ExactGuard, Histogram};

/// Source of circuit samples addressed by endpoint index. Hybrid algorithm
/// drivers are written against this so they run unchanged over HTTP devices
/// or in-process physics.
pub trait SampleBackend: Send + Sync {
    fn endpoint_count(&self) -> usize;

    fn is_up(&self, endpoint: usize) -> bool;

    fn sample_on(&self, endpoint: usize, spec: &CircuitSpec, seed: u64) -> impl Future<Output = Result<Histogram, ClientError>> + Send;

    fn mark_down(&self, _endpoint: usize) {}

    /// Indices of endpoints currently up.
    fn up_endpoints(&self) -> Vec<usize> {
        (0..self.endpoint_count()).filter(|&i| self.is_up(i)).collect()
    }
}

impl SampleBackend for QpuClient {
    fn endpoint_count(&self) -> usize {
        self.pool.len()
    }

    fn is_up(&self, endpoint: usize) -> bool {
        self.pool.health(endpoint) == Health::Up
    }

    fn mark_down(&self, endpoint: usize) {
        self.pool.set_health(endpoint, Health::Down);
    }

    async fn sample_on(&self, endpoint: usize, spec: &CircuitSpec, seed: u64) -> Result<Histogram, ClientError> {
        let url = self.pool.endpoints()[endpoint].clone();
        let job = self.submit(&url, spec, Some(seed)).await?;
        self.wait(&url, &job).await
    }
}

/// In-process devices with exact physics and no latency.
#[derive(Clone, Debug)]
pub struct LocalBackend {
    devices: usize,
    max_photons: u32,
    guard: ExactGuard,
}

impl LocalBackend {
    pub fn new(devices: usize) -> Self {
        assert!(devices > 0);
        LocalBackend { devices, max_photons: 4, guard: ExactGuard::default() }
    }

    pub fn with_max_photons(mut self, max: u32) -> Self {
        self.max_photons = max;
        self
    }
}

impl SampleBackend for LocalBackend {
    fn endpoint_count(&self) -> usize {
        self.devices
    }

    fn is_up(&self, endpoint: usize) -> bool {
        endpoint < self.devices
    }

    async fn sample_on(&self, endpoint: usize, spec: &CircuitSpec, seed: u64) -> Result<Histogram, ClientError> {
        let name = format!("local-{endpoint}");
        spec.validate(Some(self.max_photons)).map_err(|e| {
            let code = crate::service::ServiceError::from(e.clone()).code.as_str().to_string();
            ClientError::Rejected { endpoint: name.clone(), code, message: e.to_string() }
        })?;
        fock::sample_with_guard(spec, seed, &self.guard).map_err(|e| ClientError::JobFailed {
            endpoint: name,
            job_id: String::new(),
            message: e.to_string(),
        })
    }
}
