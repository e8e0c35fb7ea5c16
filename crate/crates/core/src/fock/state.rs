use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::FockError;

/// Photon occupation numbers, one entry per qumode.
///
/// Ordering is lexicographic over the occupation vector, which is also the
/// enumeration order used for outcome distributions and seeded sampling.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FockState(Vec<u32>);

impl FockState {
    pub fn new(occupations: Vec<u32>) -> Self {
        FockState(occupations)
    }

    /// The vacuum over `modes` qumodes.
    pub fn vacuum(modes: usize) -> Self {
        FockState(vec![0; modes])
    }

    /// One photon in each of the listed modes.
    pub fn single_photons(modes: usize, occupied: &[usize]) -> Self {
        let mut occ = vec![0; modes];
        for &m in occupied {
            occ[m] += 1;
        }
        FockState(occ)
    }

    pub fn num_modes(&self) -> usize {
        self.0.len()
    }

    pub fn total_photons(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn occupations(&self) -> &[u32] {
        &self.0
    }

    pub fn get(&self, mode: usize) -> u32 {
        self.0[mode]
    }

    /// Product of the factorials of the occupations.
    pub fn factorial_product(&self) -> f64 {
        self.0
            .iter()
            .map(|&k| (1..=k).map(f64::from).product::<f64>())
            .product()
    }

    /// Mode indices, each repeated by its occupation, in ascending order.
    pub fn mode_list(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .flat_map(|(m, &k)| std::iter::repeat_n(m, k as usize))
            .collect()
    }
}

impl From<Vec<u32>> for FockState {
    fn from(v: Vec<u32>) -> Self {
        FockState(v)
    }
}

/// Formats as a parenthesised, comma-separated tuple: `(2,0,1,0)`.
impl fmt::Display for FockState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, k) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{k}")?;
        }
        f.write_str(")")
    }
}

impl FromStr for FockState {
    type Err = FockError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let inner = s
            .trim()
            .strip_prefix('(')
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| FockError::Parse(s.to_string()))?;
        if inner.trim().is_empty() {
            return Ok(FockState(Vec::new()));
        }
        inner
            .split(',')
            .map(|t| t.trim().parse::<u32>())
            .collect::<Result<Vec<_>, _>>()
            .map(FockState)
            .map_err(|_| FockError::Parse(s.to_string()))
    }
}

/// All occupation vectors over `modes` modes with exactly `photons` photons,
/// in ascending lexicographic order.
pub fn enumerate_states(modes: usize, photons: u32) -> Vec<FockState> {
    fn rec(modes: usize, remaining: u32, prefix: &mut Vec<u32>, out: &mut Vec<FockState>) {
        if prefix.len() + 1 == modes {
            prefix.push(remaining);
            out.push(FockState(prefix.clone()));
            prefix.pop();
            return;
        }
        for k in 0..=remaining {
            prefix.push(k);
            rec(modes, remaining - k, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if modes == 0 {
        if photons == 0 {
            out.push(FockState(Vec::new()));
        }
        return out;
    }
    rec(modes, photons, &mut Vec::with_capacity(modes), &mut out);
    out
}

/// Number of ways to place `photons` indistinguishable photons in `modes` modes.
pub fn outcome_space_size(modes: usize, photons: u32) -> u128 {
    if modes == 0 {
        return u128::from(photons == 0);
    }
    let n = photons as u128;
    let k = (modes - 1) as u128;
    // C(n + k, k)
    let mut acc: u128 = 1;
    for i in 1..=k {
        acc = acc * (n + i) / i;
    }
    acc
}
