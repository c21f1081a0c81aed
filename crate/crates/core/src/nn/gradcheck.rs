use serde::Serialize;

use crate::error::{Error, Result};
use crate::nn::{Activation, DenseNet};

/// Central-difference comparison of [`DenseNet::backward`] against
/// `cotangent · output`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub parameters: usize,
    /// `max |a − b| / max(|a|, |b|, floor)` over all parameters.
    pub max_relative_error: f64,
    pub max_absolute_error: f64,
}

const RELATIVE_FLOOR: f64 = 1e-6;

fn param_mut(net: &mut DenseNet, layer: usize, index: usize, weights: usize) -> &mut f64 {
    let l = &mut net.layers_mut()[layer];
    if index < weights {
        &mut l.weights[index]
    } else {
        &mut l.bias[index - weights]
    }
}

/// Fails with `InvalidParameter` if a ReLU preactivation lies within `step`
/// scale of its kink, where finite differences are meaningless.
pub fn gradient_check(net: &DenseNet, input: &[f64], cotangent: &[f64], step: f64) -> Result<GradCheckReport> {
    if !(step > 0.0) {
        return Err(Error::InvalidParameter(format!("finite-difference step {step} must be positive")));
    }
    let (_, tape) = net.forward(input)?;
    let kink_band = 10.0 * step * (1.0 + input.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    for (layer, z) in net.layers().iter().zip(tape.preactivations()) {
        if layer.activation == Activation::Relu && z.iter().any(|v| v.abs() < kink_band) {
            return Err(Error::InvalidParameter("input sits near a ReLU kink".into()));
        }
    }
    let analytic = net.backward(&tape, cotangent)?.flatten();

    let scalar = |n: &DenseNet| -> Result<f64> {
        Ok(n.predict(input)?.iter().zip(cotangent).map(|(o, c)| o * c).sum())
    };
    let mut probe = net.clone();
    let mut numeric = Vec::with_capacity(analytic.len());
    for li in 0..probe.layers().len() {
        let nw = probe.layers()[li].weights.len();
        let nb = probe.layers()[li].bias.len();
        for pi in 0..nw + nb {
            let original = *param_mut(&mut probe, li, pi, nw);
            *param_mut(&mut probe, li, pi, nw) = original + step;
            let plus = scalar(&probe)?;
            *param_mut(&mut probe, li, pi, nw) = original - step;
            let minus = scalar(&probe)?;
            *param_mut(&mut probe, li, pi, nw) = original;
            numeric.push((plus - minus) / (2.0 * step));
        }
    }

    let mut max_relative_error = 0.0f64;
    let mut max_absolute_error = 0.0f64;
    for (a, b) in analytic.iter().zip(&numeric) {
        let diff = (a - b).abs();
        max_absolute_error = max_absolute_error.max(diff);
        max_relative_error = max_relative_error.max(diff / a.abs().max(b.abs()).max(RELATIVE_FLOOR));
    }
    Ok(GradCheckReport { parameters: analytic.len(), max_relative_error, max_absolute_error })
}
