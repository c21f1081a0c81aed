use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{DenseNet, Gradients};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam { lr: f64, beta1: f64, beta2: f64, eps_hat: f64 },
    Sgd { lr: f64 },
}

impl OptimizerKind {
    /// Adam with `β₁ = 0.9`, `β₂ = 0.999`, stabilizer `1e-8`.
    pub fn adam(lr: f64) -> Self {
        OptimizerKind::Adam { lr, beta1: 0.9, beta2: 0.999, eps_hat: 1e-8 }
    }

    pub fn sgd(lr: f64) -> Self {
        OptimizerKind::Sgd { lr }
    }
}

/// Optimizer moments for one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    first: Gradients,
    second: Gradients,
    step: u64,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, net: &DenseNet) -> Self {
        Self { kind, first: Gradients::zeros_like(net), second: Gradients::zeros_like(net), step: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Descend along `grads`: bias-corrected Adam or plain SGD.
    pub fn step(&mut self, net: &mut DenseNet, grads: &Gradients) -> Result<()> {
        if !grads.matches(net) || !self.first.matches(net) {
            return Err(Error::Shape("gradients do not match the network".into()));
        }
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradient".into()));
        }
        self.step += 1;
        match self.kind {
            OptimizerKind::Sgd { lr } => {
                for (layer, g) in net.layers_mut().iter_mut().zip(&grads.layers) {
                    for (p, d) in layer.weights.iter_mut().zip(&g.weights) {
                        *p -= lr * d;
                    }
                    for (p, d) in layer.bias.iter_mut().zip(&g.bias) {
                        *p -= lr * d;
                    }
                }
            }
            OptimizerKind::Adam { lr, beta1, beta2, eps_hat } => {
                let t = self.step as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps_hat);
                };
                for (((layer, g), m), v) in net
                    .layers_mut()
                    .iter_mut()
                    .zip(&grads.layers)
                    .zip(self.first.layers.iter_mut())
                    .zip(self.second.layers.iter_mut())
                {
                    for i in 0..layer.weights.len() {
                        update(&mut layer.weights[i], g.weights[i], &mut m.weights[i], &mut v.weights[i]);
                    }
                    for i in 0..layer.bias.len() {
                        update(&mut layer.bias[i], g.bias[i], &mut m.bias[i], &mut v.bias[i]);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn net() -> DenseNet {
        DenseNet::new(&[3, 2], &[Activation::Identity], &mut ChaCha8Rng::seed_from_u64(1)).unwrap()
    }

    #[test]
    fn zero_gradients_leave_parameters() {
        let mut n = net();
        let before = n.clone();
        for kind in [OptimizerKind::adam(0.1), OptimizerKind::sgd(0.1)] {
            let mut opt = OptimizerState::new(kind, &n);
            let zero = Gradients::zeros_like(&n);
            opt.step(&mut n, &zero).unwrap();
            assert_eq!(n, before);
        }
    }

    #[test]
    fn sgd_step() {
        let mut n = net();
        let before = n.clone();
        let mut g = Gradients::zeros_like(&n);
        g.layers[0].weights[2] = 3.0;
        let mut opt = OptimizerState::new(OptimizerKind::sgd(1e-6), &n);
        opt.step(&mut n, &g).unwrap();
        let delta = before.layers()[0].weights[2] - n.layers()[0].weights[2];
        assert!((delta - 3e-6).abs() < 1e-15);
    }

    #[test]
    fn first_adam_step_has_learning_rate_magnitude() {
        for g0 in [1e-4, 0.3, 250.0, -7.0] {
            let mut n = net();
            let before = n.clone();
            let mut g = Gradients::zeros_like(&n);
            g.layers[0].bias[1] = g0;
            let mut opt = OptimizerState::new(OptimizerKind::adam(0.1), &n);
            opt.step(&mut n, &g).unwrap();
            let delta = before.layers()[0].bias[1] - n.layers()[0].bias[1];
            // m̂ = g, v̂ = g², so the step is lr · g / (|g| + 1e-8)
            let expected = 0.1 * g0 / (g0.abs() + 1e-8);
            assert!((delta - expected).abs() < 1e-12, "{delta} vs {expected}");
        }
    }

    #[test]
    fn rejects_bad_gradients() {
        let mut n = net();
        let mut opt = OptimizerState::new(OptimizerKind::adam(0.1), &n);
        let mut g = Gradients::zeros_like(&n);
        g.layers[0].weights[0] = f64::NAN;
        assert!(matches!(opt.step(&mut n, &g), Err(Error::NonFinite(_))));
        let other = DenseNet::new(&[2, 2], &[Activation::Identity], &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(matches!(opt.step(&mut n, &Gradients::zeros_like(&other)), Err(Error::Shape(_))));
        assert_eq!(opt.steps(), 0);
    }
}
