//! Fully connected Q-network with rectifier hidden layers and analytic
//! backpropagation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::AgentError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs × inputs`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn affine(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.outputs {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let mut z = self.bias[o];
            for (w, xi) in row.iter().zip(x) {
                z += w * xi;
            }
            out.push(z);
        }
    }
}

/// Parameter gradients with the same shapes as the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net.layers.iter().map(|l| Layer::zeros(l.inputs, l.outputs)).collect(),
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    pub fn norm(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias))
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|g| *g *= factor);
        }
    }

    pub fn clear(&mut self) {
        self.scale(0.0);
    }
}

/// Scales `grads` so its global norm is at most `max_norm`; returns the norm before clipping.
pub fn clip_global_norm(grads: &mut Gradients, max_norm: f64) -> f64 {
    let norm = grads.norm();
    if norm > max_norm && norm > 0.0 {
        grads.scale(max_norm / norm);
    }
    norm
}

/// Pre-activations of every layer for one input.
#[derive(Debug, Clone)]
pub struct Trace {
    input: Vec<f64>,
    pre: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.pre.last().expect("network has layers")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Layer>,
}

fn relu(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        0.0
    }
}

impl Mlp {
    /// Weights uniform in `±sqrt(6 / (fan_in + fan_out))`, biases zero.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        let mut net = Self::zeros(sizes);
        for l in &mut net.layers {
            let bound = (6.0 / (l.inputs + l.outputs) as f64).sqrt();
            l.weights.iter_mut().for_each(|w| *w = rng.gen_range(-bound..=bound));
        }
        net
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        Self {
            layers: sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
        }
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self, AgentError> {
        if layers.is_empty() {
            return Err(AgentError::Shape("no layers".into()));
        }
        for (n, l) in layers.iter().enumerate() {
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(AgentError::Shape(format!("layer {n} has inconsistent buffers")));
            }
        }
        for (n, w) in layers.windows(2).enumerate() {
            if w[0].outputs != w[1].inputs {
                return Err(AgentError::Shape(format!(
                    "layer {n} outputs {} but layer {} takes {}",
                    w[0].outputs,
                    n + 1,
                    w[1].inputs
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim()];
        s.extend(self.layers.iter().map(|l| l.outputs));
        s
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("layers").outputs
    }

    fn check_input(&self, x: &[f64]) -> Result<(), AgentError> {
        if x.len() != self.input_dim() {
            return Err(AgentError::Dimension {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, AgentError> {
        self.check_input(x)?;
        let mut a = x.to_vec();
        let mut z = Vec::new();
        let last = self.layers.len() - 1;
        for (n, l) in self.layers.iter().enumerate() {
            l.affine(&a, &mut z);
            if n < last {
                z.iter_mut().for_each(|v| *v = relu(*v));
            }
            std::mem::swap(&mut a, &mut z);
        }
        Ok(a)
    }

    pub fn trace(&self, x: &[f64]) -> Result<Trace, AgentError> {
        self.check_input(x)?;
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut a = x.to_vec();
        for l in &self.layers {
            let mut z = Vec::with_capacity(l.outputs);
            l.affine(&a, &mut z);
            a = z.iter().map(|&v| relu(v)).collect();
            pre.push(z);
        }
        Ok(Trace { input: x.to_vec(), pre })
    }

    /// Gradients of `output · grad_out` with respect to every parameter.
    pub fn backward(&self, x: &[f64], grad_out: &[f64]) -> Result<Gradients, AgentError> {
        let trace = self.trace(x)?;
        let mut grads = Gradients::zeros_like(self);
        self.accumulate(&trace, grad_out, &mut grads)?;
        Ok(grads)
    }

    /// Adds the gradients for one traced input into `grads`.
    pub fn accumulate(&self, trace: &Trace, grad_out: &[f64], grads: &mut Gradients) -> Result<(), AgentError> {
        if grad_out.len() != self.output_dim() {
            return Err(AgentError::Dimension {
                expected: self.output_dim(),
                got: grad_out.len(),
            });
        }
        let mut delta = grad_out.to_vec();
        let mut activation: Vec<f64> = Vec::new();
        for n in (0..self.layers.len()).rev() {
            let l = &self.layers[n];
            let input: &[f64] = if n == 0 {
                &trace.input
            } else {
                activation.clear();
                activation.extend(trace.pre[n - 1].iter().map(|&v| relu(v)));
                &activation
            };
            let g = &mut grads.layers[n];
            for o in 0..l.outputs {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                g.bias[o] += d;
                let row = &mut g.weights[o * l.inputs..(o + 1) * l.inputs];
                for (gw, xi) in row.iter_mut().zip(input) {
                    *gw += d * xi;
                }
            }
            if n > 0 {
                let mut prev = vec![0.0; l.inputs];
                for o in 0..l.outputs {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    let row = &l.weights[o * l.inputs..(o + 1) * l.inputs];
                    for (p, w) in prev.iter_mut().zip(row) {
                        *p += d * w;
                    }
                }
                for (p, &z) in prev.iter_mut().zip(&trace.pre[n - 1]) {
                    if z <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }
        Ok(())
    }

    /// `θ ← θ − step · g`.
    pub fn descend(&mut self, grads: &Gradients, step: f64) {
        for (l, g) in self.layers.iter_mut().zip(&grads.layers) {
            for (w, gw) in l.weights.iter_mut().zip(&g.weights) {
                *w -= step * gw;
            }
            for (b, gb) in l.bias.iter_mut().zip(&g.bias) {
                *b -= step * gb;
            }
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Parameters in the order used by [`Gradients::flat`].
    pub fn params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    pub fn set_params(&mut self, values: &[f64]) -> Result<(), AgentError> {
        if values.len() != self.param_count() {
            return Err(AgentError::Dimension {
                expected: self.param_count(),
                got: values.len(),
            });
        }
        let mut it = values.iter();
        for l in &mut self.layers {
            for p in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *p = *it.next().expect("length checked");
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_network_outputs_zero() {
        let net = Mlp::zeros(&[4, 5, 3]);
        assert_eq!(net.forward(&[1.0, -2.0, 3.0, 4.0]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn identity_layer() {
        let mut net = Mlp::zeros(&[3, 3]);
        net.set_params(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0])
            .unwrap();
        assert_eq!(net.forward(&[1.5, -2.0, 7.0]).unwrap(), vec![1.5, -2.0, 7.0]);
    }

    #[test]
    fn dimension_mismatch() {
        let net = Mlp::zeros(&[3, 2]);
        assert!(matches!(net.forward(&[1.0]), Err(AgentError::Dimension { expected: 3, got: 1 })));
        assert!(net.backward(&[1.0, 2.0, 3.0], &[1.0]).is_err());
    }

    #[test]
    fn linear_gradient_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::new(&[3, 2], &mut rng);
        let x = [0.5, -1.0, 2.0];
        let go = [3.0, -0.5];
        let g = net.backward(&x, &go).unwrap();
        for i in 0..2 {
            for j in 0..3 {
                assert_eq!(g.layers[0].weights[i * 3 + j], x[j] * go[i]);
            }
            assert_eq!(g.layers[0].bias[i], go[i]);
        }
        let zero = net.backward(&x, &[0.0, 0.0]).unwrap();
        assert!(zero.flat().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn init_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::new(&[20, 20, 8], &mut rng);
        let b0 = (6.0f64 / 40.0).sqrt();
        assert!(net.layers()[0].weights.iter().all(|w| w.abs() <= b0));
        assert!(net.layers()[0].bias.iter().all(|&b| b == 0.0));
        assert_eq!(net.sizes(), vec![20, 20, 8]);
        assert_eq!(net.param_count(), 20 * 20 + 20 + 20 * 8 + 8);
    }

    #[test]
    fn clipping_scales_to_max_norm() {
        let mut net = Mlp::zeros(&[1, 2]);
        net.set_params(&[0.0, 0.0, 0.0, 0.0]).unwrap();
        let mut g = Gradients::zeros_like(&net);
        // norm sqrt(0 + 0 + 12²) = 12
        g.layers[0].bias[1] = 12.0;
        let before = clip_global_norm(&mut g, 5.0);
        assert_eq!(before, 12.0);
        assert!((g.layers[0].bias[1] - 5.0).abs() < 1e-12);
        let mut small = g.clone();
        clip_global_norm(&mut small, 100.0);
        assert_eq!(small, g);
    }

    #[test]
    fn from_layers_checks_shapes() {
        let a = Layer::zeros(2, 3);
        let b = Layer::zeros(4, 1);
        assert!(Mlp::from_layers(vec![a.clone(), b]).is_err());
        assert!(Mlp::from_layers(vec![a, Layer::zeros(3, 1)]).is_ok());
    }
}
