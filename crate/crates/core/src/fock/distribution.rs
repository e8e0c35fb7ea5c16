use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::circuit::unitary_with_derivatives;
use super::permanent::ryser;
use super::state::{enumerate_states, outcome_space_size};
use super::{build_unitary, CircuitSpec, ComplexMatrix, FockError, FockState};

/// Limits on exact outcome enumeration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactGuard {
    pub max_photons: u32,
    pub max_modes: usize,
}

impl Default for ExactGuard {
    fn default() -> Self {
        ExactGuard { max_photons: 6, max_modes: 12 }
    }
}

impl ExactGuard {
    pub fn check(&self, spec: &CircuitSpec) -> Result<(), FockError> {
        let photons = spec.total_photons();
        if photons > self.max_photons || spec.num_modes > self.max_modes {
            return Err(FockError::Capacity {
                photons,
                modes: spec.num_modes,
                max_photons: self.max_photons,
                max_modes: self.max_modes,
            });
        }
        Ok(())
    }
}

/// Probability of every photon-number-conserving outcome, lexicographically ordered.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeDistribution {
    input: FockState,
    probs: BTreeMap<FockState, f64>,
}

impl OutcomeDistribution {
    pub fn input(&self) -> &FockState {
        &self.input
    }

    pub fn probability(&self, outcome: &FockState) -> f64 {
        self.probs.get(outcome).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FockState, f64)> {
        self.probs.iter().map(|(k, &p)| (k, p))
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn total_probability(&self) -> f64 {
        self.probs.values().sum()
    }

    /// Expected value of an outcome-to-real mapping.
    pub fn expectation(&self, f: impl Fn(&FockState) -> f64) -> f64 {
        self.probs.iter().map(|(k, &p)| p * f(k)).sum()
    }

    /// Total-variation distance to an empirical histogram.
    pub fn tv_distance(&self, hist: &Histogram) -> f64 {
        let total = hist.total() as f64;
        let mut d: f64 = self
            .probs
            .iter()
            .map(|(k, &p)| (p - hist.count(k) as f64 / total).abs())
            .sum();
        // histogram mass outside the support
        d += hist
            .iter()
            .filter(|(k, _)| !self.probs.contains_key(k))
            .map(|(_, c)| c as f64 / total)
            .sum::<f64>();
        0.5 * d
    }
}

/// Outcome counts keyed by Fock state. Serialises as a JSON object whose keys
/// are tuples such as `"(2,0,1,0)"`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Histogram(BTreeMap<FockState, u64>);

impl Histogram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, outcome: FockState, count: u64) {
        if count > 0 {
            *self.0.entry(outcome).or_insert(0) += count;
        }
    }

    /// Keywise count addition.
    pub fn merge(&mut self, other: &Histogram) {
        for (k, &c) in &other.0 {
            self.add(k.clone(), c);
        }
    }

    pub fn count(&self, outcome: &FockState) -> u64 {
        self.0.get(outcome).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.0.values().sum()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FockState, u64)> {
        self.0.iter().map(|(k, &c)| (k, c))
    }

    /// Outcomes by descending count, ties in lexicographic order.
    pub fn most_frequent(&self, n: usize) -> Vec<(FockState, u64)> {
        let mut v: Vec<_> = self.0.iter().map(|(k, &c)| (k.clone(), c)).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        v.truncate(n);
        v
    }
}

impl FromIterator<(FockState, u64)> for Histogram {
    fn from_iter<I: IntoIterator<Item = (FockState, u64)>>(iter: I) -> Self {
        let mut h = Histogram::new();
        for (k, c) in iter {
            h.add(k, c);
        }
        h
    }
}

impl Serialize for Histogram {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_map(self.0.iter().map(|(k, c)| (k.to_string(), c)))
    }
}

impl<'de> Deserialize<'de> for Histogram {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = BTreeMap::<String, u64>::deserialize(deserializer)?;
        let mut h = Histogram::new();
        for (k, c) in raw {
            let state = k.parse::<FockState>().map_err(D::Error::custom)?;
            h.add(state, c);
        }
        Ok(h)
    }
}

fn transition_amplitude(u: &ComplexMatrix, input_modes: &[usize], output: &FockState) -> Complex64 {
    ryser(&u.select(&output.mode_list(), input_modes))
}

/// Exact output distribution with the default guard.
pub fn exact_distribution(spec: &CircuitSpec) -> Result<OutcomeDistribution, FockError> {
    exact_distribution_with_guard(spec, &ExactGuard::default())
}

/// `P(t) = |perm(U[t, s])|^2 / (prod s_i! prod t_j!)`, where `U[t, s]`
/// repeats row `i` of the unitary `t_i` times and column `j` `s_j` times.
pub fn exact_distribution_with_guard(spec: &CircuitSpec, guard: &ExactGuard) -> Result<OutcomeDistribution, FockError> {
    guard.check(spec)?;
    if spec.input_state.num_modes() != spec.num_modes {
        return Err(FockError::ModeMismatch { expected: spec.num_modes, actual: spec.input_state.num_modes() });
    }
    let u = build_unitary(spec)?;
    let input = &spec.input_state;
    let n = input.total_photons();
    let input_modes = input.mode_list();
    let input_norm = input.factorial_product();
    let probs = enumerate_states(spec.num_modes, n)
        .into_iter()
        .map(|t| {
            let amp = transition_amplitude(&u, &input_modes, &t);
            let p = amp.norm_sqr() / (input_norm * t.factorial_product());
            (t, p)
        })
        .collect();
    Ok(OutcomeDistribution { input: input.clone(), probs })
}

/// Number of outcomes exact enumeration would visit.
pub fn outcome_count(spec: &CircuitSpec) -> u128 {
    outcome_space_size(spec.num_modes, spec.total_photons())
}

/// Gradient of one outcome's probability with respect to every angle.
///
/// Uses multilinearity of the permanent in its rows:
/// `d perm(A) = sum_i perm(A with row i replaced by dA row i)`.
pub fn outcome_probability_gradient(spec: &CircuitSpec, outcome: &FockState) -> Result<Vec<f64>, FockError> {
    ExactGuard::default().check(spec)?;
    let (u, derivs) = unitary_with_derivatives(spec)?;
    if outcome.total_photons() != spec.total_photons() || outcome.num_modes() != spec.num_modes {
        return Ok(vec![0.0; derivs.len()]);
    }
    let rows = outcome.mode_list();
    let cols = spec.input_state.mode_list();
    let norm = spec.input_state.factorial_product() * outcome.factorial_product();
    let a = u.select(&rows, &cols);
    let amp = ryser(&a);
    Ok(derivs
        .iter()
        .map(|du| {
            let da = du.select(&rows, &cols);
            let mut d_amp = Complex64::new(0.0, 0.0);
            for i in 0..a.rows() {
                let mut swapped = a.clone();
                for j in 0..a.cols() {
                    swapped[(i, j)] = da[(i, j)];
                }
                d_amp += ryser(&swapped);
            }
            2.0 * (amp.conj() * d_amp).re / norm
        })
        .collect())
}

/// Draws `spec.n_samples` outcomes by inverse-CDF over the lexicographically
/// ordered exact distribution.
pub fn sample(spec: &CircuitSpec, seed: u64) -> Result<Histogram, FockError> {
    sample_with_guard(spec, seed, &ExactGuard::default())
}

pub fn sample_with_guard(spec: &CircuitSpec, seed: u64, guard: &ExactGuard) -> Result<Histogram, FockError> {
    let dist = exact_distribution_with_guard(spec, guard)?;
    Ok(sample_distribution(&dist, spec.n_samples, seed))
}

pub fn sample_distribution(dist: &OutcomeDistribution, shots: u64, seed: u64) -> Histogram {
    let outcomes: Vec<&FockState> = dist.probs.keys().collect();
    let mut cdf = Vec::with_capacity(outcomes.len());
    let mut acc = 0.0;
    for p in dist.probs.values() {
        acc += p;
        cdf.push(acc);
    }
    let mut counts = vec![0u64; outcomes.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..shots {
        let u: f64 = rng.gen::<f64>() * acc;
        // first bin whose cumulative mass exceeds u; zero-width bins are never hit
        let idx = cdf.partition_point(|&c| c <= u).min(outcomes.len() - 1);
        counts[idx] += 1;
    }
    outcomes
        .into_iter()
        .zip(counts)
        .filter(|(_, c)| *c > 0)
        .map(|(k, c)| (k.clone(), c))
        .collect()
}

/// Expected photon count in every mode.
pub fn mean_photon_numbers(dist: &OutcomeDistribution) -> Vec<f64> {
    let mut means = vec![0.0; dist.input.num_modes()];
    for (state, p) in dist.iter() {
        for (m, &k) in state.occupations().iter().enumerate() {
            means[m] += p * f64::from(k);
        }
    }
    means
}
