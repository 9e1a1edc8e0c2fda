//! Fully connected layers with manual backpropagation.
//!
//! Weights are stored row-major as `outputs x inputs`. A forward pass can
//! keep its intermediate activations ([`Trace`]) so that [`DenseNet::backward`]
//! can turn the gradient with respect to the last layer's pre-activation into
//! per-layer parameter gradients and the gradient with respect to the input.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::linalg::sigmoid;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => sigmoid(z),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Dense {
    /// Uniform init in `±sqrt(6 / fan_in)`, zero bias.
    pub fn init(inputs: usize, outputs: usize, activation: Activation, rng: &mut Rng) -> Self {
        let limit = (6.0 / inputs as f64).sqrt();
        let weights = (0..inputs * outputs).map(|_| rng.random_range(-limit..limit)).collect();
        Dense {
            inputs,
            outputs,
            weights,
            bias: vec![0.0; outputs],
            activation,
        }
    }

    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Dense {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
            activation,
        }
    }

    fn preactivation(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseNet {
    pub layers: Vec<Dense>,
}

/// Activations recorded by a forward pass: `outputs[0]` is the input and
/// `outputs[l + 1]` the output of layer `l`; `pre[l]` is layer `l`'s
/// pre-activation.
#[derive(Debug, Clone)]
pub struct Trace {
    pub outputs: Vec<Vec<f64>>,
    pub pre: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.outputs.last().expect("trace holds the input at least")
    }
}

/// Parameter gradients shaped like the network's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &DenseNet) -> Self {
        Gradients {
            weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            bias: net.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    pub fn add(&mut self, other: &Gradients) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        for (a, b) in self.bias.iter_mut().zip(&other.bias) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.weights
            .iter_mut()
            .chain(self.bias.iter_mut())
            .flatten()
            .for_each(|x| *x *= s);
    }

    /// Tensors in layer order: weights of layer 0, bias of layer 0, ...
    pub fn tensors(&self) -> Vec<&[f64]> {
        self.weights
            .iter()
            .zip(&self.bias)
            .flat_map(|(w, b)| [w.as_slice(), b.as_slice()])
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).flatten().all(|v| v.is_finite())
    }
}

impl DenseNet {
    /// Layers of widths `sizes`, `hidden` activation everywhere except the
    /// last layer which uses `output`.
    pub fn new(sizes: &[usize], hidden: Activation, output: Activation, rng: &mut Rng) -> Self {
        let n = sizes.len().saturating_sub(1);
        let layers = (0..n)
            .map(|l| {
                let act = if l + 1 == n { output } else { hidden };
                Dense::init(sizes[l], sizes[l + 1], act, rng)
            })
            .collect();
        DenseNet { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.inputs)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.layers.iter().map(|l| l.inputs).collect();
        s.push(self.output_dim());
        s
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        for layer in &self.layers {
            a = layer
                .preactivation(&a)
                .into_iter()
                .map(|z| layer.activation.apply(z))
                .collect();
        }
        a
    }

    pub fn forward_trace(&self, x: &[f64]) -> Trace {
        let mut outputs = Vec::with_capacity(self.layers.len() + 1);
        let mut pre = Vec::with_capacity(self.layers.len());
        outputs.push(x.to_vec());
        for layer in &self.layers {
            let z = layer.preactivation(outputs.last().unwrap());
            let a = z.iter().map(|&v| layer.activation.apply(v)).collect();
            pre.push(z);
            outputs.push(a);
        }
        Trace { outputs, pre }
    }

    /// Derivative of the last layer's activation, for turning a gradient with
    /// respect to the network output into one with respect to the last
    /// pre-activation.
    pub fn output_derivative(&self, trace: &Trace) -> Vec<f64> {
        let last = self.layers.last().expect("non-empty network");
        let l = self.layers.len() - 1;
        trace.pre[l]
            .iter()
            .zip(&trace.outputs[l + 1])
            .map(|(&z, &a)| last.activation.derivative(z, a))
            .collect()
    }

    /// Accumulate parameter gradients into `grads` given `delta`, the loss
    /// gradient with respect to the last layer's pre-activation. Returns the
    /// gradient with respect to the network input.
    pub fn backward(&self, trace: &Trace, delta: Vec<f64>, grads: &mut Gradients) -> Vec<f64> {
        let mut delta = delta;
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = &trace.outputs[l];
            let gw = &mut grads.weights[l];
            for (o, &d) in delta.iter().enumerate() {
                grads.bias[l][o] += d;
                let row = &mut gw[o * layer.inputs..(o + 1) * layer.inputs];
                row.iter_mut().zip(input).for_each(|(g, x)| *g += d * x);
            }
            let mut upstream = vec![0.0; layer.inputs];
            for (o, &d) in delta.iter().enumerate() {
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                upstream.iter_mut().zip(row).for_each(|(u, w)| *u += d * w);
            }
            if l > 0 {
                let prev = &self.layers[l - 1];
                for ((u, &z), &a) in upstream.iter_mut().zip(&trace.pre[l - 1]).zip(&trace.outputs[l]) {
                    *u *= prev.activation.derivative(z, a);
                }
            }
            delta = upstream;
        }
        delta
    }

    /// Like [`DenseNet::backward`] but starting from the gradient with
    /// respect to the network output. An empty network passes it through.
    pub fn backward_from_output(&self, trace: &Trace, grad_out: &[f64], grads: &mut Gradients) -> Vec<f64> {
        if self.layers.is_empty() {
            return grad_out.to_vec();
        }
        let delta = grad_out
            .iter()
            .zip(self.output_derivative(trace))
            .map(|(g, d)| g * d)
            .collect();
        self.backward(trace, delta, grads)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    /// Mutable views of every parameter tensor, in [`Gradients::tensors`]
    /// order.
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
            .collect()
    }
}

/// Plain gradient descent with optional heavy-ball momentum.
#[derive(Debug, Clone)]
pub struct Sgd {
    pub learning_rate: f64,
    pub momentum: f64,
    velocity: Option<Gradients>,
}

impl Sgd {
    pub fn new(learning_rate: f64, momentum: f64) -> Self {
        Sgd {
            learning_rate,
            momentum,
            velocity: None,
        }
    }

    pub fn step(&mut self, net: &mut DenseNet, grads: &Gradients) {
        let lr = self.learning_rate;
        if self.momentum == 0.0 {
            for (p, g) in net.tensors_mut().into_iter().zip(grads.tensors()) {
                p.iter_mut().zip(g).for_each(|(p, g)| *p -= lr * g);
            }
            return;
        }
        let mu = self.momentum;
        let v = self.velocity.get_or_insert_with(|| Gradients::zeros_like(net));
        let vs = v.weights.iter_mut().zip(v.bias.iter_mut()).flat_map(|(w, b)| [w, b]);
        for ((p, g), v) in net.tensors_mut().into_iter().zip(grads.tensors()).zip(vs) {
            for ((p, g), v) in p.iter_mut().zip(g).zip(v.iter_mut()) {
                *v = mu * *v + g;
                *p -= lr * *v;
            }
        }
    }
}

/// Relative error between analytic and numeric gradient tensors: the
/// largest per-tensor `|a - n| / max(|a| + |n|, floor)` using Euclidean norms.
/// The floor keeps tensors whose true gradient is zero (dead units) from
/// turning round-off into a large ratio.
pub fn relative_gradient_error(analytic: &[&[f64]], numeric: &[&[f64]]) -> f64 {
    const FLOOR: f64 = 1e-4;
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| {
            let diff = a
                .iter()
                .zip(n.iter())
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            let scale = crate::linalg::norm(a) + crate::linalg::norm(n);
            diff / scale.max(FLOOR)
        })
        .fold(0.0, f64::max)
}
