//! Ideal loop-based photonic interferometer.
//!
//! Circuits are chains of fibre delay loops. A loop of length `L` on `M`
//! qumodes contributes one diagonal of `M - L` programmable beam splitters,
//! each coupling time bins `i` and `i + L`. The beam splitter convention is
//! the real rotation
//!
//! ```text
//! [ cos t  -sin t ]
//! [ sin t   cos t ]
//! ```
//!
//! so real angles give real unitaries. Other photonics codes often use a
//! complex convention (`i sin t` off-diagonals); angles are not portable
//! between the two without a phase correction.
//!
//! Output probabilities use the standard multimode boson-sampling
//! expression, evaluated with Ryser's formula for the permanent.

mod circuit;
mod distribution;
mod matrix;
mod permanent;
mod state;

pub use circuit::{angle_count, build_unitary, couplers, CircuitSpec, Coupler};
pub use distribution::{
    exact_distribution, exact_distribution_with_guard, mean_photon_numbers, outcome_count,
    outcome_probability_gradient, sample, sample_distribution, sample_with_guard, ExactGuard, Histogram,
    OutcomeDistribution,
};
pub use matrix::ComplexMatrix;
pub use num_complex::Complex64;
pub use permanent::permanent;
pub use state::{enumerate_states, outcome_space_size, FockState};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FockError {
    #[error("beam-splitter angle count mismatch: expected {expected}, got {actual}")]
    AngleCount { expected: usize, actual: usize },
    #[error("input state has {actual} modes, circuit has {expected}")]
    ModeMismatch { expected: usize, actual: usize },
    #[error("loop length {length} invalid for {modes} modes (need 1 <= L < M)")]
    LoopLength { length: usize, modes: usize },
    #[error("{photons} photons exceeds the device maximum of {max}")]
    PhotonLimit { photons: u32, max: u32 },
    #[error("n_samples must be positive")]
    BadShots,
    #[error("non-finite beam-splitter angle {0}")]
    NonFiniteAngle(f64),
    #[error(
        "exact enumeration limited to {max_photons} photons and {max_modes} modes \
         (got {photons} photons, {modes} modes); use sampled mode or raise the guard"
    )]
    Capacity { photons: u32, modes: usize, max_photons: u32, max_modes: usize },
    #[error("permanent needs a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("cannot parse Fock state from {0:?}")]
    Parse(String),
}
