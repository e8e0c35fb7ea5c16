//! Small fully connected classifier trained with mini-batch SGD on softmax
//! cross-entropy.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::qnas::{Activation, Architecture};

pub const BATCH_SIZE: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs x inputs`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.outputs {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            out.push(self.bias[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>());
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub layers: Vec<DenseLayer>,
    pub activation: Activation,
}

fn activate(a: Activation, z: f64) -> f64 {
    match a {
        Activation::Relu => z.max(0.0),
        Activation::Tanh => z.tanh(),
    }
}

/// Derivative expressed through the activated value.
fn activate_grad(a: Activation, z: f64, y: f64) -> f64 {
    match a {
        Activation::Relu => f64::from(u8::from(z > 0.0)),
        Activation::Tanh => 1.0 - y * y,
    }
}

impl MlpModel {
    /// Hidden layers use He (relu) or Glorot (tanh) uniform initialisation;
    /// the output layer starts at zero so an untrained model is uninformed.
    pub fn new(arch: &Architecture, inputs: usize, classes: usize, rng: &mut impl Rng) -> Self {
        let mut dims = vec![inputs];
        dims.extend(&arch.widths);
        dims.push(classes);
        let hidden = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(l, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let weights = if l == hidden {
                    vec![0.0; fan_in * fan_out]
                } else {
                    let limit = match arch.activation {
                        Activation::Relu => (6.0 / fan_in as f64).sqrt(),
                        Activation::Tanh => (6.0 / (fan_in + fan_out) as f64).sqrt(),
                    };
                    (0..fan_in * fan_out).map(|_| rng.gen_range(-limit..limit)).collect()
                };
                DenseLayer { inputs: fan_in, outputs: fan_out, weights, bias: vec![0.0; fan_out] }
            })
            .collect();
        MlpModel { layers, activation: arch.activation }
    }

    /// Pre-activations and activations of every layer; the last entry holds logits.
    fn trace(&self, x: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut zs = Vec::with_capacity(self.layers.len());
        let mut acts = vec![x.to_vec()];
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::new();
            layer.forward(&acts[l], &mut z);
            let a = if l == last { z.clone() } else { z.iter().map(|&v| activate(self.activation, v)).collect() };
            zs.push(z);
            acts.push(a);
        }
        (zs, acts)
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.trace(x).1.pop().unwrap()
    }

    /// Index of the largest logit, first on ties.
    pub fn predict(&self, x: &[f64]) -> usize {
        let logits = self.logits(x);
        let mut best = 0;
        for (i, &v) in logits.iter().enumerate() {
            if v > logits[best] {
                best = i;
            }
        }
        best
    }

    pub fn accuracy(&self, xs: &[Vec<f64>], ys: &[usize]) -> f64 {
        if xs.is_empty() {
            return 0.0;
        }
        xs.iter().zip(ys).filter(|(x, &y)| self.predict(x) == y).count() as f64 / xs.len() as f64
    }

    /// Mean cross-entropy.
    pub fn loss(&self, xs: &[Vec<f64>], ys: &[usize]) -> f64 {
        xs.iter().zip(ys).map(|(x, &y)| cross_entropy(&self.logits(x), y)).sum::<f64>() / xs.len() as f64
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    fn sgd_step(&mut self, xs: &[Vec<f64>], ys: &[usize], batch: &[usize], lr: f64) {
        let mut grads: Vec<(Vec<f64>, Vec<f64>)> =
            self.layers.iter().map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.bias.len()])).collect();
        for &i in batch {
            let (zs, acts) = self.trace(&xs[i]);
            let mut delta = softmax(acts.last().unwrap());
            delta[ys[i]] -= 1.0;
            for l in (0..self.layers.len()).rev() {
                let layer = &self.layers[l];
                let input = &acts[l];
                let (gw, gb) = &mut grads[l];
                for (o, d) in delta.iter().enumerate() {
                    gb[o] += d;
                    for (g, v) in gw[o * layer.inputs..(o + 1) * layer.inputs].iter_mut().zip(input) {
                        *g += d * v;
                    }
                }
                if l > 0 {
                    delta = (0..layer.inputs)
                        .map(|j| {
                            let back: f64 = delta.iter().enumerate().map(|(o, d)| d * layer.weights[o * layer.inputs + j]).sum();
                            back * activate_grad(self.activation, zs[l - 1][j], acts[l][j])
                        })
                        .collect();
                }
            }
        }
        let scale = lr / batch.len() as f64;
        for (layer, (gw, gb)) in self.layers.iter_mut().zip(grads) {
            for (w, g) in layer.weights.iter_mut().zip(gw) {
                *w -= scale * g;
            }
            for (b, g) in layer.bias.iter_mut().zip(gb) {
                *b -= scale * g;
            }
        }
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    lse - logits[label]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub model: MlpModel,
    /// Held-out accuracy; 0 when training diverged.
    pub val_accuracy: f64,
    /// Full training-set loss after each epoch.
    pub losses: Vec<f64>,
    pub diverged: bool,
}

pub fn train_mlp(arch: &Architecture, data: &Dataset, epochs: usize, seed: u64) -> TrainOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = MlpModel::new(arch, data.num_features, data.num_classes, &mut rng);
    let lr = arch.learning_rate();
    let mut order: Vec<usize> = (0..data.train_x.len()).collect();
    let mut losses = Vec::with_capacity(epochs);
    let mut diverged = false;
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(BATCH_SIZE) {
            model.sgd_step(&data.train_x, &data.train_y, batch, lr);
        }
        let loss = model.loss(&data.train_x, &data.train_y);
        losses.push(loss);
        if !loss.is_finite() || !model.is_finite() {
            diverged = true;
            break;
        }
    }
    let val_accuracy = if diverged { 0.0 } else { model.accuracy(&data.val_x, &data.val_y) };
    TrainOutcome { model, val_accuracy, losses, diverged }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arch(widths: &[usize], activation: Activation, lr_exponent: i32) -> Architecture {
        Architecture { widths: widths.to_vec(), activation, lr_exponent }
    }

    #[test]
    fn layer_dimensions_chain() {
        let m = MlpModel::new(&arch(&[32, 8], Activation::Tanh, -2), 4, 3, &mut ChaCha8Rng::seed_from_u64(0));
        let dims: Vec<(usize, usize)> = m.layers.iter().map(|l| (l.inputs, l.outputs)).collect();
        assert_eq!(dims, [(4, 32), (32, 8), (8, 3)]);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let data = Dataset::iris();
        let a = arch(&[4, 4], Activation::Tanh, -1);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut m = MlpModel::new(&a, 4, 3, &mut rng);
        for w in m.layers[2].weights.iter_mut() {
            *w = rng.gen_range(-0.5..0.5);
        }
        let batch: Vec<usize> = (0..8).collect();
        let loss = |m: &MlpModel| batch.iter().map(|&i| cross_entropy(&m.logits(&data.train_x[i]), data.train_y[i])).sum::<f64>() / 8.0;
        let mut stepped = m.clone();
        stepped.sgd_step(&data.train_x, &data.train_y, &batch, 1.0);
        for l in 0..3 {
            for k in [0, 3] {
                let analytic = m.layers[l].weights[k] - stepped.layers[l].weights[k];
                let h = 1e-6;
                let mut p = m.clone();
                p.layers[l].weights[k] += h;
                let mut q = m.clone();
                q.layers[l].weights[k] -= h;
                let numeric = (loss(&p) - loss(&q)) / (2.0 * h);
                assert!((analytic - numeric).abs() < 1e-7, "layer {l} w{k}: {analytic} vs {numeric}");
            }
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let d = Dataset::iris();
        let a = arch(&[8], Activation::Relu, -1);
        assert_eq!(train_mlp(&a, &d, 20, 9), train_mlp(&a, &d, 20, 9));
    }

    #[test]
    fn untrained_is_chance() {
        let d = Dataset::iris();
        for widths in [vec![4], vec![32, 16]] {
            let out = train_mlp(&arch(&widths, Activation::Relu, -3), &d, 0, 1);
            assert!((out.val_accuracy - 1.0 / 3.0).abs() <= 0.15, "{}", out.val_accuracy);
            assert!(out.losses.is_empty());
        }
    }

    #[test]
    fn loss_decreases_at_small_rate() {
        let d = Dataset::iris();
        let out = train_mlp(&arch(&[16], Activation::Tanh, -3), &d, 100, 2);
        let upticks = out.losses.windows(2).filter(|w| w[1] > w[0]).count();
        assert!(upticks as f64 <= 0.05 * out.losses.len() as f64, "{upticks} upticks");
        assert!(out.losses.last().unwrap() < &out.losses[0]);
    }

    #[test]
    fn learns_iris() {
        let out = train_mlp(&arch(&[16], Activation::Tanh, -1), &Dataset::iris(), 200, 0);
        assert!(out.val_accuracy >= 0.9, "{}", out.val_accuracy);
    }

    #[test]
    fn divergence_scores_zero() {
        let mut d = Dataset::iris();
        for x in d.train_x.iter_mut() {
            for v in x.iter_mut() {
                *v *= 1e200;
            }
        }
        let out = train_mlp(&arch(&[4], Activation::Relu, -1), &d, 5, 0);
        assert!(out.diverged);
        assert_eq!(out.val_accuracy, 0.0);
    }
}
