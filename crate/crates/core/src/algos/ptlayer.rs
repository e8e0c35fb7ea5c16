//! Trainable photonic layer whose output is the vector of per-mode mean
//! photon numbers. Inputs are encoded additively on the first angles.

use serde::{Deserialize, Serialize};

use super::{sample_with_retry, AlgoError};
use crate::client::SampleBackend;
use crate::fock::{angle_count, exact_distribution_with_guard, mean_photon_numbers, CircuitSpec, ExactGuard, FockState};

pub const GRAD_STEP: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PtLayer {
    pub input_state: FockState,
    pub loop_lengths: Vec<usize>,
    #[serde(default)]
    pub guard: ExactGuard,
}

impl PtLayer {
    pub fn new(input_state: FockState, loop_lengths: Vec<usize>) -> Result<Self, AlgoError> {
        let layer = PtLayer { input_state, loop_lengths, guard: ExactGuard::default() };
        layer.circuit(vec![0.0; layer.angle_count()], 1).validate(None)?;
        Ok(layer)
    }

    pub fn num_modes(&self) -> usize {
        self.input_state.num_modes()
    }

    pub fn angle_count(&self) -> usize {
        angle_count(self.num_modes(), &self.loop_lengths)
    }

    fn circuit(&self, angles: Vec<f64>, shots: u64) -> CircuitSpec {
        CircuitSpec::new(self.input_state.clone(), self.loop_lengths.clone(), angles, shots)
    }

    /// `angles[i] + inputs[i]` for the leading angles.
    pub fn effective_angles(&self, angles: &[f64], inputs: &[f64]) -> Result<Vec<f64>, AlgoError> {
        let n = self.angle_count();
        if angles.len() != n {
            return Err(AlgoError::Structure(format!("expected {n} angles, got {}", angles.len())));
        }
        if inputs.len() > n {
            return Err(AlgoError::Structure(format!("input length {} exceeds angle count {n}", inputs.len())));
        }
        let mut eff = angles.to_vec();
        for (a, x) in eff.iter_mut().zip(inputs) {
            *a += x;
        }
        Ok(eff)
    }

    pub fn forward_exact(&self, angles: &[f64], inputs: &[f64]) -> Result<Vec<f64>, AlgoError> {
        let spec = self.circuit(self.effective_angles(angles, inputs)?, 1);
        Ok(mean_photon_numbers(&exact_distribution_with_guard(&spec, &self.guard)?))
    }

    /// Estimates the forward pass from `shots` samples on the backend.
    pub async fn forward_sampled<B: SampleBackend>(
        &self,
        backend: &B,
        angles: &[f64],
        inputs: &[f64],
        shots: u64,
        seed: u64,
    ) -> Result<Vec<f64>, AlgoError> {
        let spec = self.circuit(self.effective_angles(angles, inputs)?, shots);
        let hist = sample_with_retry(backend, 0, &spec, seed).await?;
        let mut means = vec![0.0; self.num_modes()];
        let total = hist.total() as f64;
        for (outcome, count) in hist.iter() {
            for (m, &n) in means.iter_mut().zip(outcome.occupations()) {
                *m += n as f64 * count as f64 / total;
            }
        }
        Ok(means)
    }

    /// Vector-Jacobian product `upstream . d(output)/d(angle)` by central
    /// differences at [`GRAD_STEP`].
    pub fn grad(&self, angles: &[f64], inputs: &[f64], upstream: &[f64]) -> Result<Vec<f64>, AlgoError> {
        self.grad_with_step(angles, inputs, upstream, GRAD_STEP)
    }

    pub fn grad_with_step(&self, angles: &[f64], inputs: &[f64], upstream: &[f64], h: f64) -> Result<Vec<f64>, AlgoError> {
        if upstream.len() != self.num_modes() {
            return Err(AlgoError::Structure(format!(
                "upstream gradient has length {}, layer outputs {}",
                upstream.len(),
                self.num_modes()
            )));
        }
        let base = self.effective_angles(angles, inputs)?;
        let dot = |v: Vec<f64>| v.iter().zip(upstream).map(|(a, b)| a * b).sum::<f64>();
        (0..base.len())
            .map(|i| {
                let mut plus = angles.to_vec();
                let mut minus = angles.to_vec();
                plus[i] += h;
                minus[i] -= h;
                let fp = dot(self.forward_exact(&plus, inputs)?);
                let fm = dot(self.forward_exact(&minus, inputs)?);
                Ok((fp - fm) / (2.0 * h))
            })
            .collect()
    }
}
