use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, weight_decay: 1e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam with L2 weight decay folded into the gradient
/// (`g ← g + weight_decay · p` before the moment update).
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &[Tensor]) -> Self {
        let zeros = || params.iter().map(|p| Tensor::zeros(p.rows(), p.cols())).collect();
        Self { config, step: 0, first: zeros(), second: zeros() }
    }

    /// Restores optimizer state saved with [`Adam::moments`].
    pub fn from_moments(config: AdamConfig, step: u64, first: Vec<Tensor>, second: Vec<Tensor>) -> Self {
        Self { config, step, first, second }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn moments(&self) -> (&[Tensor], &[Tensor]) {
        (&self.first, &self.second)
    }

    /// Updates `params` in place from matching `grads`.
    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) {
        assert_eq!(params.len(), grads.len(), "one gradient per parameter");
        assert_eq!(params.len(), self.first.len(), "optimizer built for a different parameter set");
        self.step += 1;
        let AdamConfig { lr, weight_decay, beta1, beta2, eps } = self.config;
        let t = self.step as f64;
        let c1 = 1.0 - libm::pow(beta1, t);
        let c2 = 1.0 - libm::pow(beta2, t);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.first.iter_mut().zip(self.second.iter_mut())) {
            let p = p.data_mut();
            for k in 0..p.len() {
                let gk = g.data()[k] + weight_decay * p[k];
                let mk = beta1 * m.data()[k] + (1.0 - beta1) * gk;
                let vk = beta2 * v.data()[k] + (1.0 - beta2) * gk * gk;
                m.data_mut()[k] = mk;
                v.data_mut()[k] = vk;
                p[k] -= lr * (mk / c1) / (libm::sqrt(vk / c2) + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn zero_gradient_only_decays() {
        let cfg = AdamConfig { lr: 0.1, weight_decay: 0.0, ..AdamConfig::default() };
        let mut params = vec![Tensor::scalar(1.5)];
        let mut adam = Adam::new(cfg, &params);
        adam.step(&mut params, &[Tensor::scalar(0.0)]);
        assert_eq!(params[0].item(), 1.5);

        let cfg = AdamConfig { lr: 0.1, weight_decay: 1e-2, ..AdamConfig::default() };
        let mut adam = Adam::new(cfg, &params);
        adam.step(&mut params, &[Tensor::scalar(0.0)]);
        let p = params[0].item();
        assert!(p < 1.5 && p > 1.5 - 0.1 - 1e-12, "{p}");
    }

    #[test]
    fn converges_on_scalar_quadratic() {
        let cfg = AdamConfig { lr: 0.01, weight_decay: 0.0, ..AdamConfig::default() };
        let mut params = vec![Tensor::scalar(0.0)];
        let mut adam = Adam::new(cfg, &params);
        for _ in 0..2000 {
            let x = params[0].item();
            adam.step(&mut params, &[Tensor::scalar(2.0 * (x - 2.0))]);
        }
        assert!((params[0].item() - 2.0).abs() < 0.01);
    }

    #[test]
    fn matches_hand_rolled_formula() {
        let cfg = AdamConfig { lr: 0.05, weight_decay: 0.1, beta1: 0.9, beta2: 0.999, eps: 1e-8 };
        let mut params = vec![Tensor::scalar(1.0)];
        let mut adam = Adam::new(cfg, &params);
        let g = 0.4;
        // independent evaluation of two steps
        let (mut p, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
        let mut expected = vec![];
        for t in 1..=2 {
            let gk = g + 0.1 * p;
            m = 0.9 * m + 0.1 * gk;
            v = 0.999 * v + 0.001 * gk * gk;
            let mhat = m / (1.0 - 0.9f64.powi(t));
            let vhat = v / (1.0 - 0.999f64.powi(t));
            p -= 0.05 * mhat / (vhat.sqrt() + 1e-8);
            expected.push(p);
        }
        adam.step(&mut params, &[Tensor::scalar(g)]);
        let first = params[0].item();
        assert!((first - expected[0]).abs() < 1e-15);
        adam.step(&mut params, &[Tensor::scalar(g)]);
        assert!((params[0].item() - expected[1]).abs() < 1e-15);
        assert_eq!(adam.steps_taken(), 2);
    }
}
