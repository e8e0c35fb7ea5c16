use rand::Rng;
use serde::{Deserialize, Serialize};

/// Simultaneous-perturbation gain schedule:
/// `a_k = a0 / (k + 1)^alpha`, `c_k = c0 / (k + 1)^gamma`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpsaGains {
    pub a0: f64,
    pub c0: f64,
    pub alpha: f64,
    pub gamma: f64,
}

impl Default for SpsaGains {
    fn default() -> Self {
        SpsaGains { a0: 0.1, c0: 0.05, alpha: 0.602, gamma: 0.101 }
    }
}

impl SpsaGains {
    pub fn step_size(&self, k: usize) -> f64 {
        self.a0 / ((k + 1) as f64).powf(self.alpha)
    }

    pub fn perturbation(&self, k: usize) -> f64 {
        self.c0 / ((k + 1) as f64).powf(self.gamma)
    }
}

/// Random +-1 direction.
pub fn rademacher(dim: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..dim).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect()
}

/// `theta +- c * delta`.
pub fn perturbed(theta: &[f64], delta: &[f64], c: f64) -> (Vec<f64>, Vec<f64>) {
    let plus = theta.iter().zip(delta).map(|(t, d)| t + c * d).collect();
    let minus = theta.iter().zip(delta).map(|(t, d)| t - c * d).collect();
    (plus, minus)
}

/// One descent step on a minimised objective from the two perturbed values.
pub fn descend(theta: &mut [f64], delta: &[f64], f_plus: f64, f_minus: f64, a: f64, c: f64) {
    let g = (f_plus - f_minus) / (2.0 * c);
    for (t, d) in theta.iter_mut().zip(delta) {
        // delta entries are +-1, so 1/delta == delta
        *t -= a * g * d;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gain_schedule() {
        let g = SpsaGains::default();
        assert_eq!(g.step_size(0), 0.1);
        assert_eq!(g.perturbation(0), 0.05);
        assert!((g.step_size(9) - 0.1 / 10f64.powf(0.602)).abs() < 1e-15);
    }

    #[test]
    fn minimises_a_quadratic() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let f = |x: &[f64]| x.iter().map(|v| (v - 1.0).powi(2)).sum::<f64>();
        let gains = SpsaGains { a0: 0.2, c0: 0.1, ..Default::default() };
        let mut theta = vec![0.0; 4];
        for k in 0..500 {
            let delta = rademacher(4, &mut rng);
            let c = gains.perturbation(k);
            let (p, m) = perturbed(&theta, &delta, c);
            descend(&mut theta, &delta, f(&p), f(&m), gains.step_size(k), c);
        }
        assert!(f(&theta) < 1e-3, "{theta:?}");
    }
}
