use serde::{Deserialize, Serialize};

use super::{batches, ClassifierSpec};
use crate::error::{Error, Result};
use crate::nn::{relative_gradient_error, Activation, DenseNet, Gradients, Sgd};
use crate::rng;

/// Feed-forward classifier: ReLU hidden layers, one sigmoid output unit,
/// trained on binary cross-entropy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub net: DenseNet,
}

fn bce(p: f64, y: f64) -> f64 {
    let p = p.clamp(1e-15, 1.0 - 1e-15);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

impl Mlp {
    pub fn new(input_dim: usize, hidden: &[usize], seed: u64) -> Self {
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let mut r = rng::stream(seed, "mlp-init", 0);
        Mlp {
            net: DenseNet::new(&sizes, Activation::Relu, Activation::Sigmoid, &mut r),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn proba(&self, x: &[f64]) -> f64 {
        self.net.forward(x)[0]
    }

    /// Mean cross-entropy over `idx` plus `l2/2 · Σ|W|²` (biases excluded),
    /// and its gradient.
    pub fn loss_and_grad(&self, rows: &[Vec<f64>], labels: &[u8], idx: &[usize], l2: f64) -> (f64, Gradients) {
        let mut g = Gradients::zeros_like(&self.net);
        let mut loss = 0.0;
        for &i in idx {
            let trace = self.net.forward_trace(&rows[i]);
            let p = trace.output()[0];
            let y = labels[i] as f64;
            loss += bce(p, y);
            // sigmoid + cross-entropy: gradient at the pre-activation is p - y
            self.net.backward(&trace, vec![p - y], &mut g);
        }
        let n = idx.len() as f64;
        g.scale(1.0 / n);
        let mut reg = 0.0;
        for (gw, layer) in g.weights.iter_mut().zip(&self.net.layers) {
            for (gv, w) in gw.iter_mut().zip(&layer.weights) {
                *gv += l2 * w;
                reg += w * w;
            }
        }
        (loss / n + 0.5 * l2 * reg, g)
    }

    pub(super) fn fit(spec: &ClassifierSpec, rows: &[Vec<f64>], labels: &[u8]) -> Result<Self> {
        let mut model = Mlp::new(rows[0].len(), &spec.hidden, spec.seed);
        let mut opt = Sgd::new(spec.learning_rate, spec.momentum);
        let mut r = rng::stream(spec.seed, "mlp-fit", 0);
        for epoch in 0..spec.epochs {
            let mut epoch_loss = 0.0;
            for batch in batches(rows.len(), spec.batch_size, &mut r) {
                let (l, g) = model.loss_and_grad(rows, labels, &batch, spec.l2);
                epoch_loss += l;
                opt.step(&mut model.net, &g);
            }
            if !epoch_loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
        }
        Ok(model)
    }
}

pub(super) fn grad_check(spec: &ClassifierSpec, rows: &[Vec<f64>], labels: &[u8], h: f64) -> f64 {
    let model = Mlp::new(rows[0].len(), &spec.hidden, spec.seed);
    let idx: Vec<usize> = (0..rows.len()).collect();
    let (_, g) = model.loss_and_grad(rows, labels, &idx, spec.l2);
    let mut probe = model.clone();
    let mut numeric = Vec::new();
    for t in 0..probe.net.tensors().len() {
        let len = probe.net.tensors()[t].len();
        let mut col = Vec::with_capacity(len);
        for k in 0..len {
            let orig = probe.net.tensors()[t][k];
            probe.net.tensors_mut()[t][k] = orig + h;
            let up = probe.loss_and_grad(rows, labels, &idx, spec.l2).0;
            probe.net.tensors_mut()[t][k] = orig - h;
            let down = probe.loss_and_grad(rows, labels, &idx, spec.l2).0;
            probe.net.tensors_mut()[t][k] = orig;
            col.push((up - down) / (2.0 * h));
        }
        numeric.push(col);
    }
    let refs: Vec<&[f64]> = numeric.iter().map(Vec::as_slice).collect();
    relative_gradient_error(&g.tensors(), &refs)
}
