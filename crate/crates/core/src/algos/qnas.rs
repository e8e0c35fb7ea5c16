//! Quantum neural architecture search.
//!
//! Every endpoint evolves its own circuit. Each generation its most frequent
//! outcomes are thresholded into genomes, decoded into architectures and
//! scored by validation accuracy; the circuit angles then take an SPSA step
//! toward higher mean fitness.

use std::collections::HashMap;
use std::fmt;
use std::time::Instant;

use futures::future::join_all;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bbs::outcome_to_bits;
use super::dataset::Dataset;
use super::mlp::train_mlp;
use super::spsa::{perturbed, rademacher, SpsaGains};
use super::{sample_with_retry, AlgoError, DeviceShape};
use crate::client::SampleBackend;
use crate::fock::Histogram;

pub const GENOME_BITS: usize = 9;
const WIDTHS: [usize; 4] = [4, 8, 16, 32];
const LR_EXPONENTS: [i32; 4] = [-3, -2, -1, -1];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Architecture {
    /// One entry per hidden layer (one or two).
    pub widths: Vec<usize>,
    pub activation: Activation,
    pub lr_exponent: i32,
}

impl Architecture {
    pub fn hidden_layers(&self) -> usize {
        self.widths.len()
    }

    pub fn learning_rate(&self) -> f64 {
        10f64.powi(self.lr_exponent)
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let widths: Vec<String> = self.widths.iter().map(|w| w.to_string()).collect();
        let act = match self.activation {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        };
        write!(f, "[{}] {act} lr=1e{}", widths.join("-"), self.lr_exponent)
    }
}

fn two_bits(hi: u8, lo: u8) -> usize {
    (usize::from(hi) << 1) | usize::from(lo)
}

/// Bit 0 layer count, bits 1-2 and 3-4 width indices (high bit first),
/// bit 5 activation, bits 6-7 learning-rate index, bit 8 reserved.
pub fn decode_genome(bits: &[u8]) -> Result<Architecture, AlgoError> {
    if bits.len() != GENOME_BITS {
        return Err(AlgoError::Structure(format!("genome needs {GENOME_BITS} bits, got {}", bits.len())));
    }
    if let Some(b) = bits.iter().find(|&&b| b > 1) {
        return Err(AlgoError::Structure(format!("genome bit value {b} is not 0 or 1")));
    }
    let mut widths = vec![WIDTHS[two_bits(bits[1], bits[2])]];
    if bits[0] == 1 {
        widths.push(WIDTHS[two_bits(bits[3], bits[4])]);
    }
    Ok(Architecture {
        widths,
        activation: if bits[5] == 1 { Activation::Tanh } else { Activation::Relu },
        lr_exponent: LR_EXPONENTS[two_bits(bits[6], bits[7])],
    })
}

/// Canonical inverse of [`decode_genome`]; unused fields encode as zero.
pub fn encode_genome(arch: &Architecture) -> Result<Vec<u8>, AlgoError> {
    let width_index = |w: usize| {
        WIDTHS.iter().position(|&x| x == w).ok_or_else(|| AlgoError::Structure(format!("width {w} not encodable")))
    };
    if !(1..=2).contains(&arch.widths.len()) {
        return Err(AlgoError::Structure(format!("{} hidden layers not encodable", arch.widths.len())));
    }
    let lr = LR_EXPONENTS
        .iter()
        .position(|&e| e == arch.lr_exponent)
        .ok_or_else(|| AlgoError::Structure(format!("learning-rate exponent {} not encodable", arch.lr_exponent)))?;
    let w1 = width_index(arch.widths[0])?;
    let w2 = match arch.widths.get(1) {
        Some(&w) => width_index(w)?,
        None => 0,
    };
    let hi = |v: usize| ((v >> 1) & 1) as u8;
    let lo = |v: usize| (v & 1) as u8;
    Ok(vec![
        u8::from(arch.widths.len() == 2),
        hi(w1),
        lo(w1),
        hi(w2),
        lo(w2),
        u8::from(arch.activation == Activation::Tanh),
        hi(lr),
        lo(lr),
        0,
    ])
}

/// Genome read from an outcome: presence bits of the first nine modes,
/// zero-padded on smaller devices.
fn genome_from_bits(bits: &[u8]) -> Vec<u8> {
    let mut g: Vec<u8> = bits.iter().copied().take(GENOME_BITS).collect();
    g.resize(GENOME_BITS, 0);
    g
}

fn genome_string(g: &[u8]) -> String {
    g.iter().map(|b| if *b == 1 { '1' } else { '0' }).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QnasConfig {
    pub device: DeviceShape,
    pub population_per_qpu: usize,
    pub generations: usize,
    pub epochs: usize,
    pub shots: u64,
    /// Gains for ascent on mean fitness (accuracy units).
    pub gains: SpsaGains,
    pub seed: u64,
}

impl Default for QnasConfig {
    fn default() -> Self {
        QnasConfig {
            device: DeviceShape::default(),
            population_per_qpu: 5,
            generations: 15,
            epochs: 200,
            shots: 200,
            gains: SpsaGains { a0: 2.0, c0: 0.3, ..SpsaGains::default() },
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub genome: String,
    pub architecture: Architecture,
    pub fitness: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndpointGeneration {
    pub endpoint: usize,
    pub population: Vec<Individual>,
    pub mean_fitness: f64,
    pub best_fitness: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QnasGeneration {
    pub generation: usize,
    /// Best fitness found so far (elitist).
    pub best_fitness: f64,
    /// Mean over this generation's sampled populations.
    pub mean_fitness: f64,
    pub generation_best: f64,
    pub best_genome: String,
    pub best_architecture: Architecture,
    pub endpoints: Vec<EndpointGeneration>,
    pub wall_time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QnasOutcome {
    pub history: Vec<QnasGeneration>,
    pub best: Individual,
    pub angles: Vec<Vec<f64>>,
}

/// splitmix64 finaliser.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn genome_value(g: &[u8]) -> u64 {
    g.iter().fold(0, |acc, &b| (acc << 1) | u64::from(b))
}

struct FitnessCache<'a> {
    data: &'a Dataset,
    epochs: usize,
    run_seed: u64,
    generation: usize,
    scores: HashMap<Vec<u8>, f64>,
}

impl FitnessCache<'_> {
    fn next_generation(&mut self, generation: usize) {
        self.generation = generation;
        self.scores.clear();
    }

    /// Training seed is fixed per (genome, generation) within a run.
    fn fitness(&mut self, genome: &[u8]) -> Result<(Architecture, f64), AlgoError> {
        let arch = decode_genome(genome)?;
        if let Some(&f) = self.scores.get(genome) {
            return Ok((arch, f));
        }
        let seed = mix(self.run_seed ^ mix(genome_value(genome) ^ ((self.generation as u64) << 16)));
        let f = train_mlp(&arch, self.data, self.epochs, seed).val_accuracy;
        self.scores.insert(genome.to_vec(), f);
        Ok((arch, f))
    }

    fn population(&mut self, hist: &Histogram, size: usize) -> Result<Vec<Individual>, AlgoError> {
        hist.most_frequent(size)
            .into_iter()
            .map(|(outcome, _)| {
                let genome = genome_from_bits(&outcome_to_bits(&outcome));
                let (architecture, fitness) = self.fitness(&genome)?;
                Ok(Individual { genome: genome_string(&genome), architecture, fitness })
            })
            .collect()
    }
}

fn mean(pop: &[Individual]) -> f64 {
    pop.iter().map(|i| i.fitness).sum::<f64>() / pop.len().max(1) as f64
}

pub async fn qnas_run<B: SampleBackend>(backend: &B, data: &Dataset, config: &QnasConfig) -> Result<QnasOutcome, AlgoError> {
    let subpops = backend.endpoint_count();
    if subpops == 0 {
        return Err(AlgoError::Structure("backend has no endpoints".into()));
    }
    if config.population_per_qpu == 0 || config.shots == 0 {
        return Err(AlgoError::Structure("population and shots must be positive".into()));
    }
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n_angles = config.device.angle_count();
    let mut angles: Vec<Vec<f64>> =
        (0..subpops).map(|_| (0..n_angles).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect()).collect();
    let mut cache = FitnessCache { data, epochs: config.epochs, run_seed: config.seed, generation: 0, scores: HashMap::new() };
    let mut best: Option<Individual> = None;
    let mut history = Vec::with_capacity(config.generations);

    for generation in 0..config.generations {
        cache.next_generation(generation);
        let a = config.gains.step_size(generation);
        let c = config.gains.perturbation(generation);
        let deltas: Vec<Vec<f64>> = (0..subpops).map(|_| rademacher(n_angles, &mut rng)).collect();
        let seed_base: u64 = rng.gen();

        let jobs = (0..subpops).map(|e| {
            let main = config.device.circuit(angles[e].clone(), config.shots);
            let (plus, minus) = perturbed(&angles[e], &deltas[e], c);
            let (plus, minus) = (main.with_angles(plus), main.with_angles(minus));
            let seed = seed_base.wrapping_add(2 * e as u64);
            async move {
                futures::try_join!(
                    sample_with_retry(backend, e, &main, seed),
                    sample_with_retry(backend, e, &plus, seed + 1),
                    sample_with_retry(backend, e, &minus, seed + 1),
                )
            }
        });
        let sampled = join_all(jobs).await;

        let mut endpoints = Vec::new();
        let mut last_error = None;
        for (e, outcome) in sampled.into_iter().enumerate() {
            let (main, plus, minus) = match outcome {
                Ok(h) => h,
                Err(err) => {
                    tracing::warn!(endpoint = e, generation, error = %err, "sub-population skipped this generation");
                    last_error = Some(err);
                    continue;
                }
            };
            let population = cache.population(&main, config.population_per_qpu)?;
            let pop_plus = cache.population(&plus, config.population_per_qpu)?;
            let pop_minus = cache.population(&minus, config.population_per_qpu)?;
            for ind in population.iter().chain(&pop_plus).chain(&pop_minus) {
                if best.as_ref().is_none_or(|b| ind.fitness > b.fitness) {
                    best = Some(ind.clone());
                }
            }
            // ascent: step along +g
            let g = (mean(&pop_plus) - mean(&pop_minus)) / (2.0 * c);
            for (t, d) in angles[e].iter_mut().zip(&deltas[e]) {
                *t += a * g * d;
            }
            endpoints.push(EndpointGeneration {
                endpoint: e,
                mean_fitness: mean(&population),
                best_fitness: population.iter().map(|i| i.fitness).fold(0.0, f64::max),
                population,
            });
        }
        if endpoints.is_empty() {
            return Err(last_error.map(AlgoError::from).unwrap_or_else(|| AlgoError::Structure("no samples".into())));
        }

        let all: Vec<&Individual> = endpoints.iter().flat_map(|e| &e.population).collect();
        let elite = best.clone().expect("at least one evaluated genome");
        history.push(QnasGeneration {
            generation,
            best_fitness: elite.fitness,
            mean_fitness: all.iter().map(|i| i.fitness).sum::<f64>() / all.len() as f64,
            generation_best: all.iter().map(|i| i.fitness).fold(0.0, f64::max),
            best_genome: elite.genome,
            best_architecture: elite.architecture,
            endpoints,
            wall_time: started.elapsed().as_secs_f64(),
        });
    }

    let best = best.ok_or_else(|| AlgoError::Structure("zero generations requested".into()))?;
    Ok(QnasOutcome { history, best, angles })
}
