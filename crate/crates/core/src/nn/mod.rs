//! Small dense networks with hand-written reverse mode.
//!
//! Score networks produce the table `μ_u(x, ·)` and noise networks produce
//! `σ_v(x) > 0` through a softplus head. Cotangents from the direct estimator
//! enter through [`DenseNet::backward`].

mod checkpoint;
mod gradcheck;
mod optim;

pub use checkpoint::{Checkpoint, LayerRecord, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use gradcheck::{gradient_check, GradCheckReport};
pub use optim::{OptimizerKind, OptimizerState};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
    Softplus,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
            Activation::Softplus => softplus(z),
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
            Activation::Softplus => softplus_derivative(z),
        }
    }
}

/// `ln(1 + e^t)` without overflow.
pub fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// Logistic function, the derivative of [`softplus`].
pub fn softplus_derivative(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Affine map followed by an element-wise activation. Weights are row-major
/// `out_dim × in_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    /// Uniform `(−1/√fan_in, 1/√fan_in)` initialization of weights and biases.
    pub fn init<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut R) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        let mut draw = || rng.random_range(-bound..bound);
        let weights = (0..in_dim * out_dim).map(|_| draw()).collect();
        let bias = (0..out_dim).map(|_| draw()).collect();
        Self { in_dim, out_dim, weights, bias, activation }
    }

    fn validate(&self) -> Result<()> {
        if self.in_dim == 0 || self.out_dim == 0 {
            return Err(Error::Shape("layer dimensions must be positive".into()));
        }
        if self.weights.len() != self.in_dim * self.out_dim || self.bias.len() != self.out_dim {
            return Err(Error::Shape(format!(
                "layer {}→{} has {} weights and {} biases",
                self.in_dim,
                self.out_dim,
                self.weights.len(),
                self.bias.len()
            )));
        }
        if self.weights.iter().chain(&self.bias).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("layer parameter".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseNet {
    layers: Vec<Layer>,
}

/// Activations cached by [`DenseNet::forward`].
#[derive(Debug, Clone)]
pub struct Tape {
    inputs: Vec<Vec<f64>>,
    preactivations: Vec<Vec<f64>>,
}

impl Tape {
    /// Preactivations of every layer, first layer first.
    pub fn preactivations(&self) -> &[Vec<f64>] {
        &self.preactivations
    }
}

impl DenseNet {
    /// Build a net with layer widths `dims` (input first) and one activation
    /// per layer.
    pub fn new<R: Rng + ?Sized>(dims: &[usize], activations: &[Activation], rng: &mut R) -> Result<Self> {
        if dims.len() < 2 || activations.len() != dims.len() - 1 {
            return Err(Error::Shape(format!(
                "{} widths need {} activations, got {}",
                dims.len(),
                dims.len().saturating_sub(1),
                activations.len()
            )));
        }
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(w, &a)| Layer::init(w[0], w[1], a, rng))
            .collect();
        Self::from_layers(layers)
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Shape("a net needs at least one layer".into()));
        }
        for l in &layers {
            l.validate()?;
        }
        if layers.windows(2).any(|w| w[0].out_dim != w[1].in_dim) {
            return Err(Error::Shape("consecutive layer dimensions do not chain".into()));
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, Tape)> {
        if input.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input of length {} for a net expecting {}",
                input.len(),
                self.input_dim()
            )));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut preactivations = Vec::with_capacity(self.layers.len());
        let mut current = input.to_vec();
        for layer in &self.layers {
            let mut z = layer.bias.clone();
            for (o, zo) in z.iter_mut().enumerate() {
                let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                *zo += row.iter().zip(&current).map(|(w, x)| w * x).sum::<f64>();
            }
            let out = z.iter().map(|&v| layer.activation.apply(v)).collect();
            inputs.push(std::mem::replace(&mut current, out));
            preactivations.push(z);
        }
        Ok((current, Tape { inputs, preactivations }))
    }

    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(input)?.0)
    }

    /// Gradients of `cotangent · output` w.r.t. every parameter.
    pub fn backward(&self, tape: &Tape, cotangent: &[f64]) -> Result<Gradients> {
        Ok(self.backward_with_input(tape, cotangent)?.0)
    }

    /// [`Self::backward`] that also returns the cotangent of the input.
    pub fn backward_with_input(&self, tape: &Tape, cotangent: &[f64]) -> Result<(Gradients, Vec<f64>)> {
        if cotangent.len() != self.output_dim() {
            return Err(Error::Shape(format!(
                "cotangent of length {} for output of {}",
                cotangent.len(),
                self.output_dim()
            )));
        }
        if tape.inputs.len() != self.layers.len() {
            return Err(Error::Shape("tape does not belong to this net".into()));
        }
        let mut grads = Gradients::zeros_like(self);
        let mut upstream = cotangent.to_vec();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let z = &tape.preactivations[idx];
            let x = &tape.inputs[idx];
            let delta: Vec<f64> =
                upstream.iter().zip(z).map(|(g, &zv)| g * layer.activation.derivative(zv)).collect();
            let g = &mut grads.layers[idx];
            let mut down = vec![0.0; layer.in_dim];
            for (o, &dv) in delta.iter().enumerate() {
                if dv == 0.0 {
                    continue;
                }
                g.bias[o] += dv;
                let row = o * layer.in_dim;
                for i in 0..layer.in_dim {
                    g.weights[row + i] += dv * x[i];
                    down[i] += dv * layer.weights[row + i];
                }
            }
            upstream = down;
        }
        Ok((grads, upstream))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint::from_net(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerGradient {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Parameter-shaped tables, used for gradients and optimizer moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
}

impl Gradients {
    pub fn zeros_like(net: &DenseNet) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGradient { weights: vec![0.0; l.weights.len()], bias: vec![0.0; l.bias.len()] })
                .collect(),
        }
    }

    pub fn matches(&self, net: &DenseNet) -> bool {
        self.layers.len() == net.layers.len()
            && self
                .layers
                .iter()
                .zip(&net.layers)
                .all(|(g, l)| g.weights.len() == l.weights.len() && g.bias.len() == l.bias.len())
    }

    fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias))
    }

    fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn add_scaled(&mut self, other: &Gradients, scale: f64) {
        for (a, b) in self.values_mut().zip(other.values()) {
            *a += scale * b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.values_mut().for_each(|v| *v *= factor);
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.values().copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn softplus_values() {
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((softplus(50.0) - 50.0).abs() < 1e-12);
        assert!(softplus(800.0).is_finite());
        assert!(softplus(-800.0) >= 0.0);
        assert_eq!(softplus_derivative(0.0), 0.5);
        assert!(softplus(-40.0) > 0.0);
    }

    #[test]
    fn zero_net_outputs_zero() {
        let layer = Layer { in_dim: 3, out_dim: 2, weights: vec![0.0; 6], bias: vec![0.0; 2], activation: Activation::Relu };
        let net = DenseNet::from_layers(vec![layer]).unwrap();
        assert_eq!(net.predict(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn identity_layer_passes_input() {
        let layer = Layer {
            in_dim: 2,
            out_dim: 2,
            weights: vec![1.0, 0.0, 0.0, 1.0],
            bias: vec![0.0, 0.0],
            activation: Activation::Identity,
        };
        let net = DenseNet::from_layers(vec![layer]).unwrap();
        assert_eq!(net.predict(&[0.3, -7.0]).unwrap(), vec![0.3, -7.0]);
    }

    #[test]
    fn softplus_head_at_zero() {
        let layer = Layer { in_dim: 1, out_dim: 1, weights: vec![0.0], bias: vec![0.0], activation: Activation::Softplus };
        let net = DenseNet::from_layers(vec![layer]).unwrap();
        assert!((net.predict(&[4.0]).unwrap()[0] - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn backward_linear_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = DenseNet::new(&[3, 2], &[Activation::Identity], &mut rng).unwrap();
        let x = [0.5, -1.0, 2.0];
        let (_, tape) = net.forward(&x).unwrap();
        let zero = net.backward(&tape, &[0.0, 0.0]).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
        let g = net.backward(&tape, &[1.0, 0.0]).unwrap();
        assert_eq!(&g.layers[0].weights[0..3], &x);
        assert_eq!(&g.layers[0].weights[3..6], &[0.0; 3]);
        assert_eq!(g.layers[0].bias, vec![1.0, 0.0]);
    }

    #[test]
    fn shape_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = DenseNet::new(&[3, 4, 2], &[Activation::Relu, Activation::Identity], &mut rng).unwrap();
        assert!(net.forward(&[1.0]).is_err());
        let (_, tape) = net.forward(&[1.0, 2.0, 3.0]).unwrap();
        assert!(net.backward(&tape, &[1.0]).is_err());
        assert!(DenseNet::new(&[3, 4], &[], &mut rng).is_err());
        let a = Layer::init(3, 4, Activation::Relu, &mut rng);
        let b = Layer::init(5, 1, Activation::Relu, &mut rng);
        assert!(DenseNet::from_layers(vec![a, b]).is_err());
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = DenseNet::new(&[4, 8, 1], &[Activation::Relu, Activation::Softplus], &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = DenseNet::new(&[4, 8, 1], &[Activation::Relu, Activation::Softplus], &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert!(a.layers()[0].weights.iter().all(|w| w.abs() <= 0.5));
        assert_eq!(a.num_params(), 4 * 8 + 8 + 8 + 1);
    }
}
