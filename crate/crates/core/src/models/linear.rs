use serde::{Deserialize, Serialize};

use super::{batches, ClassifierSpec};
use crate::error::{Error, Result};
use crate::linalg::{dot, sigmoid};
use crate::nn::relative_gradient_error;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearLoss {
    /// Binary cross-entropy on `sigmoid(w·x + b)`.
    Logistic,
    /// `max(0, 1 - y(w·x + b))` with `y ∈ {-1, +1}`.
    Hinge,
}

/// `w·x + b` scored either as a logistic model or a linear SVM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub loss: LinearLoss,
}

impl LinearModel {
    pub fn zeros(dim: usize, loss: LinearLoss) -> Self {
        LinearModel {
            weights: vec![0.0; dim],
            bias: 0.0,
            loss,
        }
    }

    /// Signed margin `w·x + b`.
    pub fn margin(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }

    pub fn proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.margin(x))
    }

    /// Mean data loss over `idx` plus `l2/2 · |w|²`, and its gradient
    /// (weights, bias). For the hinge this is a subgradient.
    pub fn loss_and_grad(&self, rows: &[Vec<f64>], labels: &[u8], idx: &[usize], l2: f64) -> (f64, Vec<f64>, f64) {
        let mut gw = vec![0.0; self.weights.len()];
        let mut gb = 0.0;
        let mut loss = 0.0;
        for &i in idx {
            let x = &rows[i];
            let m = self.margin(x);
            let coeff = match self.loss {
                LinearLoss::Logistic => {
                    let y = labels[i] as f64;
                    // log(1 + e^m) - y m, written to stay finite for large |m|
                    loss += m.max(0.0) + (-m.abs()).exp().ln_1p() - y * m;
                    sigmoid(m) - y
                }
                LinearLoss::Hinge => {
                    let y = if labels[i] == 1 { 1.0 } else { -1.0 };
                    let slack = 1.0 - y * m;
                    if slack > 0.0 {
                        loss += slack;
                        -y
                    } else {
                        0.0
                    }
                }
            };
            gw.iter_mut().zip(x).for_each(|(g, v)| *g += coeff * v);
            gb += coeff;
        }
        let n = idx.len() as f64;
        gw.iter_mut().zip(&self.weights).for_each(|(g, w)| *g = *g / n + l2 * w);
        let reg = 0.5 * l2 * dot(&self.weights, &self.weights);
        (loss / n + reg, gw, gb / n)
    }

    pub(super) fn fit(spec: &ClassifierSpec, loss: LinearLoss, rows: &[Vec<f64>], labels: &[u8]) -> Result<Self> {
        let mut model = LinearModel::zeros(rows[0].len(), loss);
        let mut vw = vec![0.0; model.weights.len()];
        let mut vb = 0.0;
        let mut r = rng::stream(spec.seed, "linear-fit", 0);
        for epoch in 0..spec.epochs {
            let mut epoch_loss = 0.0;
            for batch in batches(rows.len(), spec.batch_size, &mut r) {
                let (l, gw, gb) = model.loss_and_grad(rows, labels, &batch, spec.l2);
                epoch_loss += l * batch.len() as f64;
                for ((w, v), g) in model.weights.iter_mut().zip(vw.iter_mut()).zip(&gw) {
                    *v = spec.momentum * *v + g;
                    *w -= spec.learning_rate * *v;
                }
                vb = spec.momentum * vb + gb;
                model.bias -= spec.learning_rate * vb;
            }
            if !epoch_loss.is_finite() || !model.bias.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
        }
        Ok(model)
    }
}

pub(super) fn grad_check(spec: &ClassifierSpec, rows: &[Vec<f64>], labels: &[u8], h: f64) -> f64 {
    use rand::Rng as _;
    let mut r = rng::stream(spec.seed, "linear-gradcheck", 0);
    let mut model = LinearModel::zeros(rows[0].len(), LinearLoss::Logistic);
    model.weights.iter_mut().for_each(|w| *w = r.random_range(-1.0..1.0));
    model.bias = r.random_range(-1.0..1.0);
    let idx: Vec<usize> = (0..rows.len()).collect();
    let (_, gw, gb) = model.loss_and_grad(rows, labels, &idx, spec.l2);

    let mut nw = Vec::with_capacity(gw.len());
    for k in 0..model.weights.len() {
        let mut m = model.clone();
        m.weights[k] += h;
        let up = m.loss_and_grad(rows, labels, &idx, spec.l2).0;
        m.weights[k] -= 2.0 * h;
        let down = m.loss_and_grad(rows, labels, &idx, spec.l2).0;
        nw.push((up - down) / (2.0 * h));
    }
    let mut m = model.clone();
    m.bias += h;
    let up = m.loss_and_grad(rows, labels, &idx, spec.l2).0;
    m.bias -= 2.0 * h;
    let down = m.loss_and_grad(rows, labels, &idx, spec.l2).0;
    let nb = (up - down) / (2.0 * h);
    relative_gradient_error(&[&gw, &[gb]], &[&nw, &[nb]])
}

#[cfg(test)]
mod tests {
    use super::super::{fit, fit_linear_svm, ClassifierKind, TrainedClassifier};
    use super::*;
    use crate::dataset::LabeledDataset;

    fn separable_pair(scale: f64) -> LabeledDataset {
        LabeledDataset::new(vec![vec![0.0], vec![scale]], vec![0, 1]).unwrap()
    }

    #[test]
    fn zero_weights_give_one_half() {
        let m = LinearModel::zeros(3, LinearLoss::Logistic);
        assert_eq!(m.proba(&[5.0, -2.0, 9.0]), 0.5);
        let svm = LinearModel::zeros(1, LinearLoss::Hinge);
        assert_eq!(svm.margin(&[4.0]), 0.0);
        assert_eq!(svm.proba(&[4.0]), 0.5);
    }

    #[test]
    fn logistic_separates_a_pair() {
        // Reference run: with lr 0.5 the decision boundary crosses 0.5 well
        // before 200 epochs of full-batch descent on {0 -> 0, 1 -> 1}.
        let mut s = ClassifierSpec::new(ClassifierKind::Logistic);
        s.learning_rate = 0.5;
        s.epochs = 200;
        let d = separable_pair(1.0);
        let m = fit(&s, &d).unwrap();
        let acc = d
            .features()
            .iter()
            .zip(d.labels())
            .filter(|(x, &y)| m.predict(x).unwrap() == y)
            .count();
        assert_eq!(acc, 2);
    }

    #[test]
    fn svm_margin_signs_and_scale_invariance() {
        let mut s = ClassifierSpec::new(ClassifierKind::LinearSvm);
        s.learning_rate = 0.1;
        s.epochs = 300;
        let d = separable_pair(1.0);
        let TrainedClassifier::LinearSvm(m) = fit_linear_svm(&d, &s).unwrap() else {
            panic!("expected svm")
        };
        assert!(m.margin(&[0.0]) < 0.0 && m.margin(&[1.0]) > 0.0);

        // features x2, weights /2: lr / 4 and l2 * 4 keep the weight dynamics equivalent
        let mut s2 = s.clone();
        s2.learning_rate = s.learning_rate / 4.0;
        s2.l2 = s.l2 * 4.0;
        s2.epochs = s.epochs * 4;
        let d2 = separable_pair(2.0);
        let m2 = fit_linear_svm(&d2, &s2).unwrap();
        let labels: Vec<u8> = d2.features().iter().map(|x| m2.predict(x).unwrap()).collect();
        assert_eq!(labels, vec![0, 1]);
    }

    #[test]
    fn logistic_gradient_matches_differences() {
        let rows: Vec<Vec<f64>> = (0..8)
            .map(|i| vec![i as f64 / 8.0, ((i * 7) % 5) as f64 / 5.0 - 0.3])
            .collect();
        let labels: Vec<u8> = (0..8).map(|i| u8::from(i % 3 == 0)).collect();
        let mut s = ClassifierSpec::new(ClassifierKind::Logistic);
        s.l2 = 0.05;
        assert!(grad_check(&s, &rows, &labels, 1e-5) < 1e-7);
    }
}
