//! Shared fixtures for the benchmarks.

use photonic_hpc::fock::{CircuitSpec, Complex64, ComplexMatrix, FockState};

/// Deterministic dense complex matrix with entries in the unit square.
pub fn test_matrix(n: usize) -> ComplexMatrix {
    let rows = (0..n)
        .map(|i| (0..n).map(|j| Complex64::new(((i * 7 + j * 3) % 11) as f64 / 11.0 - 0.5, ((i + j * 5) % 13) as f64 / 13.0 - 0.5)).collect())
        .collect();
    ComplexMatrix::from_rows(rows)
}

/// `photons` single photons in alternating modes of an `modes`-mode, two-loop circuit.
pub fn loop_circuit(modes: usize, photons: usize, shots: u64) -> CircuitSpec {
    let occupied: Vec<usize> = (0..modes).step_by(2).take(photons).collect();
    let loops = vec![1, 1];
    let n = photonic_hpc::fock::angle_count(modes, &loops);
    let angles = (0..n).map(|k| 0.05 + 0.2 * k as f64).collect();
    CircuitSpec::new(FockState::single_photons(modes, &occupied), loops, angles, shots)
}
