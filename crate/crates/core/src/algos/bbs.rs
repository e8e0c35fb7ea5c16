//! Binary bosonic solver: photonic samples as candidate QUBO solutions.
//!
//! Variables are split into device-sized tiles and optimised by block
//! coordinate descent. Each iteration samples every tile's circuit (the
//! circuits do not depend on the frozen variables, so all tiles are sampled
//! concurrently, one endpoint per tile round-robin), then visits the tiles in
//! order. Each thresholded outcome proposes three tile assignments: the bits
//! themselves, their complement, and the incumbent with those bits flipped.
//! Proposals are scored with the other tiles frozen at the incumbent and the
//! tile's angles take one SPSA step on the expected conditional energy of the
//! plain bits. A final pass tries joint flips over pairs of tiles.

use std::collections::BTreeSet;
use std::time::Instant;

use futures::future::try_join_all;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::qubo::{QuboProblem, TileSubproblem, Tiling};
use super::spsa::{descend, perturbed, rademacher, SpsaGains};
use super::{sample_with_retry, AlgoError, DeviceShape};
use crate::client::SampleBackend;
use crate::fock::{FockState, Histogram};

/// Photon-presence thresholding: `bit_i = min(n_i, 1)`.
pub fn outcome_to_bits(outcome: &FockState) -> Vec<u8> {
    outcome.occupations().iter().map(|&n| u8::from(n > 0)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BbsConfig {
    pub device: DeviceShape,
    pub shots_per_step: u64,
    pub max_iterations: usize,
    /// Stop after this many iterations without improvement.
    pub patience: usize,
    pub gains: SpsaGains,
    pub seed: u64,
}

impl Default for BbsConfig {
    fn default() -> Self {
        BbsConfig {
            device: DeviceShape { loop_lengths: vec![1, 2, 3], ..DeviceShape::default() },
            shots_per_step: 200,
            max_iterations: 200,
            patience: 50,
            gains: SpsaGains::default(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BbsIteration {
    pub iteration: usize,
    pub best_energy: f64,
    pub mean_energy: f64,
    pub wall_time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BbsState {
    pub angles: Vec<Vec<f64>>,
    pub best_assignment: Vec<u8>,
    pub best_energy: f64,
    pub iteration: usize,
    pub history: Vec<BbsIteration>,
}

fn mean_energy(sub: &TileSubproblem, hist: &Histogram, width: usize) -> f64 {
    let total = hist.total() as f64;
    hist.iter()
        .map(|(o, c)| sub.energy(&outcome_to_bits(o)[..width]) * c as f64)
        .sum::<f64>()
        / total
}

/// Distinct flip moves proposed by a tile's samples: the variables whose
/// bit is set, and the complementary set.
fn tile_moves(tile: &[usize], hists: [&Histogram; 3]) -> Vec<Vec<usize>> {
    let mut masks = BTreeSet::new();
    for hist in hists {
        for (outcome, _) in hist.iter() {
            let bits = outcome_to_bits(outcome);
            let mask: u64 = (0..tile.len()).filter(|&a| bits[a] == 1).fold(0, |m, a| m | (1 << a));
            let full = if tile.len() == 64 { u64::MAX } else { (1u64 << tile.len()) - 1 };
            masks.insert(mask);
            masks.insert(!mask & full);
        }
    }
    masks.remove(&0);
    masks.into_iter().map(|m| (0..tile.len()).filter(|&a| m >> a & 1 == 1).map(|a| tile[a]).collect()).collect()
}

/// Joint moves over pairs of tiles; the per-tile pass cannot change two
/// tiles at once. Applies the best improving pair for each tile pair.
fn recombine(
    problem: &QuboProblem,
    tiles: &[Vec<usize>],
    samples: &[(Histogram, Histogram, Histogram)],
    best: &mut [u8],
    best_energy: &mut f64,
) -> bool {
    let moves: Vec<Vec<Vec<usize>>> =
        tiles.iter().zip(samples).map(|(tile, (m, p, n))| tile_moves(tile, [m, p, n])).collect();
    let mut improved = false;
    for t in 0..tiles.len() {
        for u in t + 1..tiles.len() {
            let d: Vec<f64> = best.iter().map(|&b| if b == 0 { 1.0 } else { -1.0 }).collect();
            let single = |flips: &[usize]| {
                let mut x = best.to_vec();
                let mut delta = 0.0;
                for &i in flips {
                    delta += problem.flip_delta(&x, i);
                    x[i] ^= 1;
                }
                delta
            };
            let da: Vec<f64> = moves[t].iter().map(|m| single(m)).collect();
            let db: Vec<f64> = moves[u].iter().map(|m| single(m)).collect();
            let mut choice = None;
            let mut best_delta = -1e-9;
            for (a, ma) in moves[t].iter().enumerate() {
                for (b, mb) in moves[u].iter().enumerate() {
                    let mut cross = 0.0;
                    for &i in ma {
                        for &j in mb {
                            cross += problem.get(i, j) * d[i] * d[j];
                        }
                    }
                    let total = da[a] + db[b] + 2.0 * cross;
                    if total < best_delta {
                        best_delta = total;
                        choice = Some((a, b));
                    }
                }
            }
            if let Some((a, b)) = choice {
                for &i in moves[t][a].iter().chain(&moves[u][b]) {
                    best[i] ^= 1;
                }
                *best_energy = problem.energy(best);
                improved = true;
            }
        }
    }
    improved
}

pub async fn bbs_solve<B: SampleBackend>(
    problem: &QuboProblem,
    tiling: &Tiling,
    backend: &B,
    config: &BbsConfig,
) -> Result<BbsState, AlgoError> {
    let modes = config.device.num_modes;
    tiling.validate(problem.size(), modes)?;
    if backend.endpoint_count() == 0 {
        return Err(AlgoError::Structure("backend has no endpoints".into()));
    }
    if config.shots_per_step == 0 {
        return Err(AlgoError::Structure("shots_per_step must be positive".into()));
    }
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n_angles = config.device.angle_count();
    let tiles = tiling.tiles();
    let mut angles: Vec<Vec<f64>> = tiles
        .iter()
        .map(|_| (0..n_angles).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect())
        .collect();

    let mut best_assignment = vec![0u8; problem.size()];
    let mut best_energy = problem.energy(&best_assignment);
    let mut history = Vec::new();
    let mut stale = 0;
    let mut iteration = 0;

    while iteration < config.max_iterations && stale < config.patience {
        let k = iteration;
        let a = config.gains.step_size(k);
        let c = config.gains.perturbation(k);
        let deltas: Vec<Vec<f64>> = tiles.iter().map(|_| rademacher(n_angles, &mut rng)).collect();
        let seed_base: u64 = rng.gen();

        let jobs = tiles.iter().enumerate().map(|(t, _)| {
            let (plus, minus) = perturbed(&angles[t], &deltas[t], c);
            let main = config.device.circuit(angles[t].clone(), config.shots_per_step);
            let plus = main.with_angles(plus);
            let minus = main.with_angles(minus);
            let seed = seed_base.wrapping_add(2 * t as u64);
            async move {
                // plus and minus share a seed (common random numbers)
                let (m, p, n) = futures::try_join!(
                    sample_with_retry(backend, t, &main, seed),
                    sample_with_retry(backend, t, &plus, seed + 1),
                    sample_with_retry(backend, t, &minus, seed + 1),
                )?;
                Ok::<_, crate::client::ClientError>((m, p, n))
            }
        });
        let samples = try_join_all(jobs).await?;

        let mut improved = false;
        let mut mean_acc = 0.0;
        for (t, tile) in tiles.iter().enumerate() {
            let width = tile.len();
            let sub = TileSubproblem::new(problem, tile, &best_assignment);
            let (main, plus, minus) = &samples[t];
            for hist in [main, plus, minus] {
                for (outcome, _) in hist.iter() {
                    let bits = &outcome_to_bits(outcome)[..width];
                    let incumbent: Vec<u8> = tile.iter().map(|&v| best_assignment[v]).collect();
                    let complement: Vec<u8> = bits.iter().map(|b| 1 - b).collect();
                    let flipped: Vec<u8> = bits.iter().zip(&incumbent).map(|(b, x)| b ^ x).collect();
                    for cand in [bits, &complement[..], &flipped[..]] {
                        let e = sub.energy(cand);
                        if e < best_energy - 1e-12 {
                            best_energy = e;
                            sub.apply(&mut best_assignment, cand);
                            improved = true;
                        }
                    }
                }
            }
            mean_acc += mean_energy(&sub, main, width);
            let f_plus = mean_energy(&sub, plus, width);
            let f_minus = mean_energy(&sub, minus, width);
            descend(&mut angles[t], &deltas[t], f_plus, f_minus, a, c);
        }
        if recombine(problem, tiles, &samples, &mut best_assignment, &mut best_energy) {
            improved = true;
        }
        debug_assert!((problem.energy(&best_assignment) - best_energy).abs() < 1e-9);

        iteration += 1;
        stale = if improved { 0 } else { stale + 1 };
        history.push(BbsIteration {
            iteration,
            best_energy,
            mean_energy: mean_acc / tiles.len() as f64,
            wall_time: started.elapsed().as_secs_f64(),
        });
    }

    Ok(BbsState { angles, best_assignment, best_energy, iteration, history })
}
