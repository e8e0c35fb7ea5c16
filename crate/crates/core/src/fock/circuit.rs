use serde::{Deserialize, Serialize};

use super::{ComplexMatrix, FockError, FockState};

/// One unit of QPU work: a loop-based interferometer, the photons fed into
/// it, and how many times to run it.
///
/// A loop of length `L` adds the couplers `(i, i + L)` for
/// `i = 0 .. M - L - 1`. Angles are consumed loop by loop, ascending in `i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec {
    pub num_modes: usize,
    pub loop_lengths: Vec<usize>,
    pub bs_angles: Vec<f64>,
    pub input_state: FockState,
    pub n_samples: u64,
}

/// Position of one beam splitter in the circuit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Coupler {
    pub upper: usize,
    pub lower: usize,
}

impl CircuitSpec {
    /// Builds a spec whose mode count is taken from the input state.
    pub fn new(input_state: FockState, loop_lengths: Vec<usize>, bs_angles: Vec<f64>, n_samples: u64) -> Self {
        CircuitSpec { num_modes: input_state.num_modes(), loop_lengths, bs_angles, input_state, n_samples }
    }

    /// Same circuit shape with every angle zero.
    pub fn identity(input_state: FockState, loop_lengths: Vec<usize>, n_samples: u64) -> Self {
        let count = angle_count(input_state.num_modes(), &loop_lengths);
        Self::new(input_state, loop_lengths, vec![0.0; count], n_samples)
    }

    pub fn total_photons(&self) -> u32 {
        self.input_state.total_photons()
    }

    pub fn with_angles(&self, bs_angles: Vec<f64>) -> Self {
        CircuitSpec { bs_angles, ..self.clone() }
    }

    pub fn with_shots(&self, n_samples: u64) -> Self {
        CircuitSpec { n_samples, ..self.clone() }
    }

    pub fn expected_angle_count(&self) -> usize {
        angle_count(self.num_modes, &self.loop_lengths)
    }

    /// Checks the structural invariants, plus the photon ceiling when given.
    pub fn validate(&self, max_photons: Option<u32>) -> Result<(), FockError> {
        if self.input_state.num_modes() != self.num_modes {
            return Err(FockError::ModeMismatch { expected: self.num_modes, actual: self.input_state.num_modes() });
        }
        for &l in &self.loop_lengths {
            if l == 0 || l >= self.num_modes {
                return Err(FockError::LoopLength { length: l, modes: self.num_modes });
            }
        }
        let expected = self.expected_angle_count();
        if self.bs_angles.len() != expected {
            return Err(FockError::AngleCount { expected, actual: self.bs_angles.len() });
        }
        if let Some(a) = self.bs_angles.iter().find(|a| !a.is_finite()) {
            return Err(FockError::NonFiniteAngle(*a));
        }
        if let Some(max) = max_photons {
            let n = self.total_photons();
            if n > max {
                return Err(FockError::PhotonLimit { photons: n, max });
            }
        }
        if self.n_samples == 0 {
            return Err(FockError::BadShots);
        }
        Ok(())
    }

    /// Couplers in angle-consumption order.
    pub fn couplers(&self) -> Vec<Coupler> {
        couplers(self.num_modes, &self.loop_lengths)
    }
}

/// Number of beam splitters, and hence angles, for a given loop layout.
pub fn angle_count(modes: usize, loop_lengths: &[usize]) -> usize {
    loop_lengths.iter().map(|&l| modes.saturating_sub(l)).sum()
}

pub fn couplers(modes: usize, loop_lengths: &[usize]) -> Vec<Coupler> {
    loop_lengths
        .iter()
        .flat_map(|&l| (0..modes.saturating_sub(l)).map(move |i| Coupler { upper: i, lower: i + l }))
        .collect()
}

/// Mode transformation of the circuit: the ordered product of its beam
/// splitters, each the real rotation `[[cos t, -sin t], [sin t, cos t]]` on
/// its mode pair. Column `j` holds the output amplitudes of input mode `j`.
pub fn build_unitary(spec: &CircuitSpec) -> Result<ComplexMatrix, FockError> {
    let expected = spec.expected_angle_count();
    if spec.bs_angles.len() != expected {
        return Err(FockError::AngleCount { expected, actual: spec.bs_angles.len() });
    }
    for &l in &spec.loop_lengths {
        if l == 0 || l >= spec.num_modes {
            return Err(FockError::LoopLength { length: l, modes: spec.num_modes });
        }
    }
    let mut u = ComplexMatrix::identity(spec.num_modes);
    for (c, &theta) in spec.couplers().iter().zip(&spec.bs_angles) {
        u.rotate_rows(c.upper, c.lower, theta.cos(), theta.sin());
    }
    Ok(u)
}

/// The unitary together with its derivative with respect to every angle.
pub(crate) fn unitary_with_derivatives(spec: &CircuitSpec) -> Result<(ComplexMatrix, Vec<ComplexMatrix>), FockError> {
    let u = build_unitary(spec)?;
    let couplers = spec.couplers();
    let m = spec.num_modes;
    // prefix[k] = B_k ... B_1 (first k splitters applied)
    let mut prefix = Vec::with_capacity(couplers.len() + 1);
    prefix.push(ComplexMatrix::identity(m));
    for (c, &theta) in couplers.iter().zip(&spec.bs_angles) {
        let mut next = prefix.last().unwrap().clone();
        next.rotate_rows(c.upper, c.lower, theta.cos(), theta.sin());
        prefix.push(next);
    }
    // suffix[k] = B_K ... B_{k+1} (splitters after index k)
    let mut suffix = vec![ComplexMatrix::identity(m); couplers.len() + 1];
    for k in (0..couplers.len()).rev() {
        let c = couplers[k];
        let theta = spec.bs_angles[k];
        let mut b = ComplexMatrix::identity(m);
        b.rotate_rows(c.upper, c.lower, theta.cos(), theta.sin());
        suffix[k] = &suffix[k + 1] * &b;
    }
    let derivs = couplers
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let theta = spec.bs_angles[k];
            let (s, co) = theta.sin_cos();
            let mut db = ComplexMatrix::zeros(m, m);
            db[(c.upper, c.upper)] = (-s).into();
            db[(c.upper, c.lower)] = (-co).into();
            db[(c.lower, c.upper)] = co.into();
            db[(c.lower, c.lower)] = (-s).into();
            &(&suffix[k + 1] * &db) * &prefix[k]
        })
        .collect();
    Ok((u, derivs))
}
