//! Dense autoencoders trained on original data or on VBD.
//!
//! Every layer uses ReLU except the last, which is a sigmoid, so inputs are
//! expected in [0, 1]. Training minimizes the per-instance mean squared
//! reconstruction error with mini-batch gradient descent.

mod gradcheck;
mod vae;

pub use gradcheck::{grad_check, grad_check_with};
pub use vae::{gaussian_kl, train_vae, vae_grad_check, VaeGradients, VaeModel, VaeTerms};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, DenseNet, Gradients, Sgd};
use crate::rng;

/// Layer widths from input to output, e.g. `9,6,4,3,4,6,9`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AeArchitecture {
    layer_sizes: Vec<usize>,
}

/// Published layer plans, keyed by dataset name: (original data, VBD).
const PRESETS: &[(&str, &[usize], &[usize])] = &[
    ("wbc", &[9, 6, 4, 3, 4, 6, 9], &[18, 12, 8, 6, 8, 12, 18]),
    ("pima", &[8, 6, 4, 3, 4, 6, 8], &[16, 12, 8, 6, 8, 12, 16]),
    ("haberman", &[3, 2, 1, 2, 3], &[6, 4, 2, 4, 6]),
    ("blood", &[4, 3, 2, 3, 4], &[8, 6, 4, 6, 8]),
    ("parkinson", &[22, 18, 12, 6, 12, 18, 22], &[44, 36, 24, 12, 24, 36, 44]),
    (
        "mnist",
        &[784, 128, 64, 32, 64, 128, 784],
        &[1568, 256, 128, 64, 128, 256, 1568],
    ),
    (
        "fashion-mnist",
        &[784, 128, 64, 32, 64, 128, 784],
        &[1568, 256, 128, 64, 128, 256, 1568],
    ),
];

impl AeArchitecture {
    /// Validate a layer plan: at least three layers, symmetric, with a unique
    /// narrowest layer in the middle.
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        let n = layer_sizes.len();
        if n < 3 || n % 2 == 0 {
            return bad(format!(
                "autoencoder needs an odd number (>= 3) of layers, got {layer_sizes:?}"
            ));
        }
        if layer_sizes.contains(&0) {
            return bad(format!("layer widths must be positive: {layer_sizes:?}"));
        }
        if layer_sizes.iter().ne(layer_sizes.iter().rev()) {
            return bad(format!("layer plan must be palindromic: {layer_sizes:?}"));
        }
        let mid = n / 2;
        let narrowest = layer_sizes
            .iter()
            .enumerate()
            .all(|(i, &w)| i == mid || w > layer_sizes[mid]);
        if !narrowest {
            return bad(format!(
                "bottleneck must be the unique narrowest layer: {layer_sizes:?}"
            ));
        }
        Ok(AeArchitecture { layer_sizes })
    }

    /// A published plan for `dataset`, in its original-data or VBD form.
    pub fn preset(dataset: &str, vbd: bool) -> Option<Self> {
        let key = dataset.to_ascii_lowercase();
        PRESETS
            .iter()
            .find(|(name, ..)| *name == key)
            .map(|(_, orig, doubled)| AeArchitecture {
                layer_sizes: if vbd { doubled.to_vec() } else { orig.to_vec() },
            })
    }

    /// Default plan for `dim` inputs: each encoder layer is
    /// `min(w - 1, ⌈2w/3⌉)` wide, stopping before the width drops below
    /// `⌈dim/3⌉` (at least 1). Gives `9,6,4,3,...`, `4,3,2,...`, `3,2,1,...`.
    pub fn default_for(dim: usize) -> Result<Self> {
        let floor = dim.div_ceil(3).max(1);
        let mut enc = vec![dim];
        loop {
            let w = *enc.last().unwrap();
            let next = (w.saturating_sub(1)).min((2 * w).div_ceil(3));
            if next < floor || next == 0 {
                break;
            }
            enc.push(next);
        }
        let mut sizes = enc.clone();
        sizes.extend(enc.iter().rev().skip(1));
        Self::new(sizes)
    }

    /// Every width doubled: the plan for VBD built with factor 2.
    pub fn doubled(&self) -> Self {
        AeArchitecture {
            layer_sizes: self.layer_sizes.iter().map(|w| 2 * w).collect(),
        }
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn bottleneck_index(&self) -> usize {
        self.layer_sizes.len() / 2
    }

    pub fn bottleneck_dim(&self) -> usize {
        self.layer_sizes[self.bottleneck_index()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub momentum: f64,
    pub seed: u64,
    /// Share of the supplied rows held out for validation, chosen by seed
    /// before training starts. 0 disables validation.
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            learning_rate: 0.05,
            batch_size: 32,
            momentum: 0.0,
            seed: 0,
            validation_fraction: 0.2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad("validation_fraction must lie in [0, 1)");
        }
        Ok(())
    }
}

/// Per-epoch losses. `train_loss[e]` averages the batch losses seen during
/// epoch `e`; `val_loss[e]` is the mean reconstruction error on the held-out
/// rows after epoch `e` (empty when no rows were held out).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub train_rows: usize,
    pub val_rows: usize,
}

impl TrainReport {
    pub fn final_val_loss(&self) -> Option<f64> {
        self.val_loss.last().copied()
    }

    /// CSV with columns `epoch,train_loss,val_loss` (1-based epochs).
    pub fn write_csv<W: std::io::Write>(&self, mut out: W, preamble: &[String]) -> std::io::Result<()> {
        for line in preamble {
            writeln!(out, "# {line}")?;
        }
        writeln!(out, "epoch,train_loss,val_loss")?;
        for (e, t) in self.train_loss.iter().enumerate() {
            let v = self.val_loss.get(e).map_or(String::new(), |v| v.to_string());
            writeln!(out, "{},{t},{v}", e + 1)?;
        }
        out.flush()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AeModel {
    pub architecture: AeArchitecture,
    pub net: DenseNet,
}

fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

/// Mean over coordinates of `(a - b)²`.
pub fn mean_squared_error(a: &[f64], b: &[f64]) -> f64 {
    crate::linalg::sq_dist(a, b) / a.len() as f64
}

impl AeModel {
    pub fn new(architecture: AeArchitecture, seed: u64) -> Self {
        let mut r = rng::stream(seed, "ae-init", 0);
        let net = DenseNet::new(
            architecture.layer_sizes(),
            Activation::Relu,
            Activation::Sigmoid,
            &mut r,
        );
        AeModel { architecture, net }
    }

    /// Rebuild from stored layers, checking that their shapes chain along
    /// the architecture.
    pub fn from_parts(architecture: AeArchitecture, net: DenseNet) -> Result<Self> {
        if net.sizes() != architecture.layer_sizes() {
            return Err(Error::Format(format!(
                "layer shapes {:?} do not match architecture {:?}",
                net.sizes(),
                architecture.layer_sizes()
            )));
        }
        for l in &net.layers {
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(Error::Format("layer parameter count does not match its shape".into()));
            }
        }
        Ok(AeModel { architecture, net })
    }

    pub fn input_dim(&self) -> usize {
        self.architecture.input_dim()
    }

    pub fn reconstruct(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.input_dim(), x.len())?;
        Ok(self.net.forward(x))
    }

    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.input_dim(), x.len())?;
        let b = self.architecture.bottleneck_index();
        let mut a = x.to_vec();
        for layer in &self.net.layers[..b] {
            a = DenseNet {
                layers: vec![layer.clone()],
            }
            .forward(&a);
        }
        Ok(a)
    }

    pub fn decode(&self, code: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.architecture.bottleneck_dim(), code.len())?;
        let b = self.architecture.bottleneck_index();
        let decoder = DenseNet {
            layers: self.net.layers[b..].to_vec(),
        };
        Ok(decoder.forward(code))
    }

    /// Mean squared difference between `x` and its reconstruction.
    pub fn reconstruction_error(&self, x: &[f64]) -> Result<f64> {
        let out = self.reconstruct(x)?;
        Ok(mean_squared_error(x, &out))
    }

    /// Reconstruct a pair-concatenated vector and split the output into the
    /// decoded halves `(A', B')`.
    pub fn reconstruct_halves(&self, v: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if self.input_dim() % 2 != 0 {
            return Err(Error::invalid(format!(
                "model input dimension {} is odd",
                self.input_dim()
            )));
        }
        let out = self.reconstruct(v)?;
        crate::vbd::split_halves(&out)
    }

    /// Batch loss (mean per-instance MSE) and gradient over `rows[idx]`.
    pub fn loss_and_grad(&self, rows: &[Vec<f64>], idx: &[usize]) -> (f64, Gradients) {
        let mut g = Gradients::zeros_like(&self.net);
        let mut loss = 0.0;
        let dim = self.input_dim() as f64;
        for &i in idx {
            let x = &rows[i];
            let trace = self.net.forward_trace(x);
            let out = trace.output();
            loss += mean_squared_error(x, out);
            let dact = self.net.output_derivative(&trace);
            let delta = out
                .iter()
                .zip(x)
                .zip(&dact)
                .map(|((o, t), d)| 2.0 * (o - t) / dim * d)
                .collect();
            self.net.backward(&trace, delta, &mut g);
        }
        let n = idx.len() as f64;
        g.scale(1.0 / n);
        (loss / n, g)
    }

    pub fn mean_error(&self, rows: &[Vec<f64>], idx: &[usize]) -> f64 {
        idx.iter()
            .map(|&i| mean_squared_error(&rows[i], &self.net.forward(&rows[i])))
            .sum::<f64>()
            / idx.len() as f64
    }
}

/// Seeded hold-out split: `(train, validation)` row indices.
pub(crate) fn holdout(n: usize, fraction: f64, seed: u64, tag: &str) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::stream(seed, tag, 0));
    let n_val = if fraction > 0.0 {
        ((n as f64 * fraction).round() as usize).clamp(1, n - 1)
    } else {
        0
    };
    let train = idx.split_off(n_val);
    (train, idx)
}

pub(crate) fn check_unit_range(data: &[Vec<f64>], dim: usize) -> Result<()> {
    for (i, row) in data.iter().enumerate() {
        check_dim(dim, row.len())?;
        if row.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid(format!(
                "row {i} has values outside [0, 1]; normalize first"
            )));
        }
    }
    Ok(())
}

/// Train an autoencoder on `data` (values in [0, 1]).
pub fn train_ae(data: &[Vec<f64>], arch: &AeArchitecture, config: &TrainConfig) -> Result<(AeModel, TrainReport)> {
    config.validate()?;
    if data.len() < 2 {
        return Err(Error::TooFewInstances {
            needed: 2,
            have: data.len(),
        });
    }
    check_unit_range(data, arch.input_dim())?;
    let (train, val) = holdout(data.len(), config.validation_fraction, config.seed, "ae-split");
    let mut model = AeModel::new(arch.clone(), config.seed);
    let mut opt = Sgd::new(config.learning_rate, config.momentum);
    let mut r = rng::stream(config.seed, "ae-epochs", 0);
    let mut report = TrainReport {
        train_loss: Vec::with_capacity(config.epochs),
        val_loss: Vec::with_capacity(config.epochs),
        train_rows: train.len(),
        val_rows: val.len(),
    };
    let mut order = train.clone();
    for epoch in 0..config.epochs {
        order.shuffle(&mut r);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let (loss, g) = model.loss_and_grad(data, batch);
            total += loss * batch.len() as f64;
            opt.step(&mut model.net, &g);
        }
        let train_loss = total / order.len() as f64;
        if !train_loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        report.train_loss.push(train_loss);
        if !val.is_empty() {
            let v = model.mean_error(data, &val);
            if !v.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            report.val_loss.push(v);
        }
    }
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Dense;

    #[test]
    fn presets_match_published_plans() {
        let wbc = AeArchitecture::preset("WBC", false).unwrap();
        assert_eq!(wbc.layer_sizes(), &[9, 6, 4, 3, 4, 6, 9]);
        assert_eq!(wbc.bottleneck_dim(), 3);
        let wbc_vbd = AeArchitecture::preset("wbc", true).unwrap();
        assert_eq!(wbc_vbd.layer_sizes(), &[18, 12, 8, 6, 8, 12, 18]);
        assert_eq!(wbc_vbd.bottleneck_dim(), 6);
        for (name, ..) in PRESETS {
            let a = AeArchitecture::preset(name, false).unwrap();
            assert_eq!(a.doubled(), AeArchitecture::preset(name, true).unwrap());
            assert!(AeArchitecture::new(a.layer_sizes().to_vec()).is_ok());
        }
        assert!(AeArchitecture::preset("iris", false).is_none());
    }

    #[test]
    fn default_plans() {
        assert_eq!(
            AeArchitecture::default_for(9).unwrap().layer_sizes(),
            &[9, 6, 4, 3, 4, 6, 9]
        );
        assert_eq!(
            AeArchitecture::default_for(8).unwrap().layer_sizes(),
            &[8, 6, 4, 3, 4, 6, 8]
        );
        assert_eq!(AeArchitecture::default_for(4).unwrap().layer_sizes(), &[4, 3, 2, 3, 4]);
        assert_eq!(AeArchitecture::default_for(3).unwrap().layer_sizes(), &[3, 2, 1, 2, 3]);
        assert_eq!(AeArchitecture::default_for(2).unwrap().layer_sizes(), &[2, 1, 2]);
        assert!(AeArchitecture::default_for(1).is_err());
    }

    #[test]
    fn rejects_bad_plans() {
        assert!(AeArchitecture::new(vec![4, 2]).is_err());
        assert!(AeArchitecture::new(vec![4, 2, 3]).is_err());
        assert!(AeArchitecture::new(vec![4, 4, 4]).is_err());
        assert!(AeArchitecture::new(vec![4, 2, 5, 2, 4]).is_err());
        assert!(AeArchitecture::new(vec![4, 0, 4]).is_err());
    }

    #[test]
    fn every_preset_forward_pass_keeps_dimension() {
        for (name, ..) in PRESETS.iter().take(5) {
            for vbd in [false, true] {
                let arch = AeArchitecture::preset(name, vbd).unwrap();
                let m = AeModel::new(arch.clone(), 1);
                let x = vec![0.5; arch.input_dim()];
                let out = m.reconstruct(&x).unwrap();
                assert_eq!(out.len(), arch.input_dim());
                assert!(out.iter().all(|v| *v > 0.0 && *v < 1.0));
                assert_eq!(m.encode(&x).unwrap().len(), arch.bottleneck_dim());
                assert_eq!(m.decode(&m.encode(&x).unwrap()).unwrap(), out);
            }
        }
    }

    /// A 2-1-2 network whose sigmoid output is fixed at `target` regardless
    /// of input: zero weights, bias = logit(target).
    fn constant_model(target: [f64; 2]) -> AeModel {
        let arch = AeArchitecture::new(vec![2, 1, 2]).unwrap();
        let logit = |p: f64| (p / (1.0 - p)).ln();
        let net = DenseNet {
            layers: vec![
                Dense::zeros(2, 1, Activation::Relu),
                Dense {
                    bias: vec![logit(target[0]), logit(target[1])],
                    ..Dense::zeros(1, 2, Activation::Sigmoid)
                },
            ],
        };
        AeModel::from_parts(arch, net).unwrap()
    }

    #[test]
    fn reconstruction_error_examples() {
        let m = constant_model([0.25, 0.75]);
        assert!(m.reconstruction_error(&[0.25, 0.75]).unwrap() < 1e-24);
        assert!((mean_squared_error(&[0.0, 0.0], &[1.0, 1.0]) - 1.0).abs() < 1e-15);
        let a = [0.1, 0.9, 0.4];
        let b = [0.3, 0.2, 0.4];
        let pa = [0.4, 0.1, 0.9];
        let pb = [0.4, 0.3, 0.2];
        assert_eq!(mean_squared_error(&a, &b), mean_squared_error(&pa, &pb));
        assert!(m.reconstruction_error(&[0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn halves_of_reconstruction() {
        let arch = AeArchitecture::preset("wbc", true).unwrap();
        let m = AeModel::new(arch, 3);
        let v = vec![0.3; 18];
        let (a, b) = m.reconstruct_halves(&v).unwrap();
        assert_eq!((a.len(), b.len()), (9, 9));
        let mut joined = a.clone();
        joined.extend(&b);
        assert_eq!(joined, m.reconstruct(&v).unwrap());

        let odd = AeModel::new(AeArchitecture::new(vec![3, 2, 3]).unwrap(), 0);
        assert!(odd.reconstruct_halves(&[0.1, 0.2, 0.3]).is_err());
    }

    #[test]
    fn training_reduces_loss_on_toy_set() {
        let data: Vec<Vec<f64>> = (0..10)
            .map(|i| {
                let t = i as f64 / 9.0;
                vec![t, 1.0 - t, 0.5 * t + 0.25, 0.8 - 0.6 * t]
            })
            .collect();
        let arch = AeArchitecture::new(vec![4, 3, 2, 3, 4]).unwrap();
        let cfg = TrainConfig {
            epochs: 200,
            learning_rate: 0.1,
            batch_size: 2,
            seed: 5,
            ..TrainConfig::default()
        };
        let (_, report) = train_ae(&data, &arch, &cfg).unwrap();
        assert_eq!(report.train_loss.len(), 200);
        assert_eq!(report.val_loss.len(), 200);
        assert_eq!((report.train_rows, report.val_rows), (8, 2));
        assert!(report
            .train_loss
            .iter()
            .chain(&report.val_loss)
            .all(|l| l.is_finite() && *l >= 0.0));
        assert!(report.train_loss.last().unwrap() < &report.train_loss[0]);

        let (_, again) = train_ae(&data, &arch, &cfg).unwrap();
        assert_eq!(report, again);
    }

    #[test]
    fn train_rejects_bad_input() {
        let arch = AeArchitecture::new(vec![2, 1, 2]).unwrap();
        let cfg = TrainConfig::default();
        assert!(train_ae(&[vec![0.5, 0.5]], &arch, &cfg).is_err());
        assert!(train_ae(&[vec![0.5, 1.5], vec![0.0, 0.0]], &arch, &cfg).is_err());
        assert!(train_ae(&[vec![0.5], vec![0.0]], &arch, &cfg).is_err());
        let zero = TrainConfig { epochs: 0, ..cfg };
        assert!(train_ae(&[vec![0.5, 0.5], vec![0.0, 0.0]], &arch, &zero).is_err());
    }

    #[test]
    fn report_csv() {
        let r = TrainReport {
            train_loss: vec![0.5, 0.25],
            val_loss: vec![0.75, 0.5],
            train_rows: 8,
            val_rows: 2,
        };
        let mut buf = Vec::new();
        r.write_csv(&mut buf, &[]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "epoch,train_loss,val_loss\n1,0.5,0.75\n2,0.25,0.5\n"
        );
    }
}
