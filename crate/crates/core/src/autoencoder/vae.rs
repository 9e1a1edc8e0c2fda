//! Variational autoencoder with a diagonal Gaussian posterior.
//!
//! The encoder trunk follows the architecture down to the layer before the
//! bottleneck; two linear heads then produce the posterior mean and log
//! variance, whose width is the bottleneck width. The decoder mirrors the
//! rest of the plan with a sigmoid output read as Bernoulli means. The loss
//! per instance is binary cross-entropy summed over features plus the KL
//! divergence from the standard normal prior.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{check_unit_range, holdout, mean_squared_error, AeArchitecture, TrainConfig, TrainReport};
use crate::error::{Error, Result};
use crate::nn::{relative_gradient_error, Activation, DenseNet, Gradients, Sgd, Trace};
use crate::rng::{self, Rng};

const PROB_CLAMP: f64 = 1e-12;

/// Closed-form `KL(N(mu, diag(exp(logvar))) || N(0, I))`.
pub fn gaussian_kl(mu: &[f64], logvar: &[f64]) -> f64 {
    -0.5 * mu
        .iter()
        .zip(logvar)
        .map(|(m, lv)| 1.0 + lv - m * m - lv.exp())
        .sum::<f64>()
}

fn bce(x: &[f64], p: &[f64]) -> f64 {
    x.iter()
        .zip(p)
        .map(|(&t, &q)| {
            let q = q.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            -(t * q.ln() + (1.0 - t) * (1.0 - q).ln())
        })
        .sum()
}

/// Batch-averaged loss terms.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VaeTerms {
    pub reconstruction: f64,
    pub kl: f64,
}

impl VaeTerms {
    pub fn total(&self) -> f64 {
        self.reconstruction + self.kl
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaeModel {
    pub architecture: AeArchitecture,
    pub trunk: DenseNet,
    pub mu_head: DenseNet,
    pub logvar_head: DenseNet,
    pub decoder: DenseNet,
}

/// Parameter gradients for the four parts of a [`VaeModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct VaeGradients {
    pub trunk: Gradients,
    pub mu_head: Gradients,
    pub logvar_head: Gradients,
    pub decoder: Gradients,
}

impl VaeGradients {
    fn zeros_like(m: &VaeModel) -> Self {
        VaeGradients {
            trunk: Gradients::zeros_like(&m.trunk),
            mu_head: Gradients::zeros_like(&m.mu_head),
            logvar_head: Gradients::zeros_like(&m.logvar_head),
            decoder: Gradients::zeros_like(&m.decoder),
        }
    }

    fn scale(&mut self, s: f64) {
        for g in [
            &mut self.trunk,
            &mut self.mu_head,
            &mut self.logvar_head,
            &mut self.decoder,
        ] {
            g.scale(s);
        }
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut t = self.trunk.tensors();
        t.extend(self.mu_head.tensors());
        t.extend(self.logvar_head.tensors());
        t.extend(self.decoder.tensors());
        t
    }
}

struct Pass {
    trunk: Trace,
    mu: Trace,
    logvar: Trace,
    decoder: Trace,
}

impl VaeModel {
    pub fn new(architecture: AeArchitecture, seed: u64) -> Self {
        let mut r = rng::stream(seed, "vae-init", 0);
        let sizes = architecture.layer_sizes();
        let b = architecture.bottleneck_index();
        let trunk = DenseNet::new(&sizes[..b], Activation::Relu, Activation::Relu, &mut r);
        let head = [sizes[b - 1], sizes[b]];
        let mu_head = DenseNet::new(&head, Activation::Identity, Activation::Identity, &mut r);
        let logvar_head = DenseNet::new(&head, Activation::Identity, Activation::Identity, &mut r);
        let decoder = DenseNet::new(&sizes[b..], Activation::Relu, Activation::Sigmoid, &mut r);
        VaeModel {
            architecture,
            trunk,
            mu_head,
            logvar_head,
            decoder,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.architecture.input_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.architecture.bottleneck_dim()
    }

    /// Posterior mean and log variance for `x`.
    pub fn encode(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        let h = self.trunk.forward(x);
        Ok((self.mu_head.forward(&h), self.logvar_head.forward(&h)))
    }

    /// Decode the posterior mean.
    pub fn reconstruct(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (mu, _) = self.encode(x)?;
        Ok(self.decoder.forward(&mu))
    }

    pub fn reconstruction_error(&self, x: &[f64]) -> Result<f64> {
        Ok(mean_squared_error(x, &self.reconstruct(x)?))
    }

    fn pass(&self, x: &[f64], noise: &[f64]) -> (Pass, Vec<f64>) {
        let trunk = self.trunk.forward_trace(x);
        let mu = self.mu_head.forward_trace(trunk.output());
        let logvar = self.logvar_head.forward_trace(trunk.output());
        let z: Vec<f64> = mu
            .output()
            .iter()
            .zip(logvar.output())
            .zip(noise)
            .map(|((m, lv), e)| m + (0.5 * lv).exp() * e)
            .collect();
        let decoder = self.decoder.forward_trace(&z);
        (
            Pass {
                trunk,
                mu,
                logvar,
                decoder,
            },
            z,
        )
    }

    /// Loss terms for `rows[idx]` with fixed reparameterization noise
    /// (`noise[k]` belongs to `idx[k]`).
    pub fn loss(&self, rows: &[Vec<f64>], idx: &[usize], noise: &[Vec<f64>]) -> VaeTerms {
        let mut t = VaeTerms::default();
        for (&i, e) in idx.iter().zip(noise) {
            let (p, _) = self.pass(&rows[i], e);
            t.reconstruction += bce(&rows[i], p.decoder.output());
            t.kl += gaussian_kl(p.mu.output(), p.logvar.output());
        }
        let n = idx.len() as f64;
        VaeTerms {
            reconstruction: t.reconstruction / n,
            kl: t.kl / n,
        }
    }

    pub fn loss_and_grad(&self, rows: &[Vec<f64>], idx: &[usize], noise: &[Vec<f64>]) -> (VaeTerms, VaeGradients) {
        let mut g = VaeGradients::zeros_like(self);
        let mut t = VaeTerms::default();
        for (&i, e) in idx.iter().zip(noise) {
            let x = &rows[i];
            let (p, _) = self.pass(x, e);
            let mu = p.mu.output();
            let lv = p.logvar.output();
            t.reconstruction += bce(x, p.decoder.output());
            t.kl += gaussian_kl(mu, lv);

            let delta = p.decoder.output().iter().zip(x).map(|(q, x)| q - x).collect();
            let dz = self.decoder.backward(&p.decoder, delta, &mut g.decoder);
            let dmu: Vec<f64> = dz.iter().zip(mu).map(|(d, m)| d + m).collect();
            let dlv: Vec<f64> = dz
                .iter()
                .zip(lv)
                .zip(e)
                .map(|((d, lv), e)| d * e * 0.5 * (0.5 * lv).exp() + 0.5 * (lv.exp() - 1.0))
                .collect();
            let mut dh = self.mu_head.backward(&p.mu, dmu, &mut g.mu_head);
            let dh_lv = self.logvar_head.backward(&p.logvar, dlv, &mut g.logvar_head);
            dh.iter_mut().zip(dh_lv).for_each(|(a, b)| *a += b);
            self.trunk.backward_from_output(&p.trunk, &dh, &mut g.trunk);
        }
        let n = idx.len() as f64;
        g.scale(1.0 / n);
        let terms = VaeTerms {
            reconstruction: t.reconstruction / n,
            kl: t.kl / n,
        };
        (terms, g)
    }

    fn parts_mut(&mut self) -> [&mut DenseNet; 4] {
        [
            &mut self.trunk,
            &mut self.mu_head,
            &mut self.logvar_head,
            &mut self.decoder,
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.parts_mut().into_iter().flat_map(DenseNet::tensors_mut).collect()
    }

    /// Relative error between the analytic gradient and central differences
    /// of the loss over `batch`, with the noise drawn from `seed`.
    pub fn grad_check(&self, batch: &[Vec<f64>], epsilon: f64, seed: u64) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::invalid("gradient check needs at least one row"));
        }
        check_unit_range(batch, self.input_dim())?;
        let idx: Vec<usize> = (0..batch.len()).collect();
        let noise = draw_noise(
            &mut rng::stream(seed, "vae-gradcheck", 0),
            batch.len(),
            self.latent_dim(),
        );
        let (_, g) = self.loss_and_grad(batch, &idx, &noise);
        let mut probe = self.clone();
        let shapes: Vec<usize> = probe.tensors_mut().iter().map(|t| t.len()).collect();
        let mut numeric = Vec::with_capacity(shapes.len());
        for (ti, &len) in shapes.iter().enumerate() {
            let mut col = Vec::with_capacity(len);
            for k in 0..len {
                let orig = probe.tensors_mut()[ti][k];
                probe.tensors_mut()[ti][k] = orig + epsilon;
                let up = probe.loss(batch, &idx, &noise).total();
                probe.tensors_mut()[ti][k] = orig - epsilon;
                let down = probe.loss(batch, &idx, &noise).total();
                probe.tensors_mut()[ti][k] = orig;
                col.push((up - down) / (2.0 * epsilon));
            }
            numeric.push(col);
        }
        let numeric: Vec<&[f64]> = numeric.iter().map(Vec::as_slice).collect();
        Ok(relative_gradient_error(&g.tensors(), &numeric))
    }
}

/// Gradient check of a freshly initialized VAE for `arch`, with biases drawn
/// at random so no ReLU unit starts exactly on its kink.
pub fn vae_grad_check(arch: &AeArchitecture, batch: &[Vec<f64>], epsilon: f64, seed: u64) -> Result<f64> {
    let mut model = VaeModel::new(arch.clone(), seed);
    let mut r = rng::stream(seed, "vae-gradcheck-bias", 0);
    for net in model.parts_mut() {
        for layer in &mut net.layers {
            layer.bias.iter_mut().for_each(|b| *b = r.random_range(-0.5..0.5));
        }
    }
    model.grad_check(batch, epsilon, seed)
}

fn draw_noise(r: &mut Rng, rows: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| (0..dim).map(|_| StandardNormal.sample(r)).collect())
        .collect()
}

/// Train a VAE on `data` (values in [0, 1]). Reported losses are the total
/// (reconstruction + KL) per instance.
pub fn train_vae(data: &[Vec<f64>], arch: &AeArchitecture, config: &TrainConfig) -> Result<(VaeModel, TrainReport)> {
    config.validate()?;
    if data.len() < 2 {
        return Err(Error::TooFewInstances {
            needed: 2,
            have: data.len(),
        });
    }
    check_unit_range(data, arch.input_dim())?;
    let (train, val) = holdout(data.len(), config.validation_fraction, config.seed, "vae-split");
    let mut model = VaeModel::new(arch.clone(), config.seed);
    let mut opts: Vec<Sgd> = (0..4)
        .map(|_| Sgd::new(config.learning_rate, config.momentum))
        .collect();
    let mut order_rng = rng::stream(config.seed, "vae-epochs", 0);
    let latent = model.latent_dim();
    let mut report = TrainReport {
        train_loss: Vec::with_capacity(config.epochs),
        val_loss: Vec::with_capacity(config.epochs),
        train_rows: train.len(),
        val_rows: val.len(),
    };
    let mut order = train.clone();
    for epoch in 0..config.epochs {
        order.shuffle(&mut order_rng);
        let mut noise_rng = rng::stream(config.seed, "vae-noise", epoch as u64);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let noise = draw_noise(&mut noise_rng, batch.len(), latent);
            let (terms, g) = model.loss_and_grad(data, batch, &noise);
            total += terms.total() * batch.len() as f64;
            let grads = [&g.trunk, &g.mu_head, &g.logvar_head, &g.decoder];
            for ((net, opt), g) in model.parts_mut().into_iter().zip(&mut opts).zip(grads) {
                opt.step(net, g);
            }
        }
        let train_loss = total / order.len() as f64;
        if !train_loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        report.train_loss.push(train_loss);
        if !val.is_empty() {
            let noise = draw_noise(
                &mut rng::stream(config.seed, "vae-val", epoch as u64),
                val.len(),
                latent,
            );
            let v = model.loss(data, &val, &noise).total();
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

    #[test]
    fn kl_closed_form_values() {
        assert_eq!(gaussian_kl(&[0.0, 0.0], &[0.0, 0.0]), 0.0);
        assert!((gaussian_kl(&[1.0], &[0.0]) - 0.5).abs() < 1e-15);
        // logvar = ln 2: 0.5 * (2 - 1 - ln 2)
        let lv = 2f64.ln();
        assert!((gaussian_kl(&[0.0], &[lv]) - 0.5 * (1.0 - lv)).abs() < 1e-15);
    }

    #[test]
    fn shapes_follow_architecture() {
        let arch = AeArchitecture::new(vec![9, 6, 4, 3, 4, 6, 9]).unwrap();
        let m = VaeModel::new(arch, 0);
        assert_eq!(m.trunk.sizes(), vec![9, 6, 4]);
        assert_eq!(m.mu_head.sizes(), vec![4, 3]);
        assert_eq!(m.decoder.sizes(), vec![3, 4, 6, 9]);
        let (mu, lv) = m.encode(&[0.5; 9]).unwrap();
        assert_eq!((mu.len(), lv.len()), (3, 3));
        assert_eq!(m.reconstruct(&[0.5; 9]).unwrap().len(), 9);
    }

    #[test]
    fn shallow_plan_has_empty_trunk() {
        let arch = AeArchitecture::new(vec![4, 2, 4]).unwrap();
        let m = VaeModel::new(arch, 1);
        assert!(m.trunk.layers.is_empty());
        let batch = vec![vec![0.2, 0.4, 0.6, 0.8], vec![0.9, 0.1, 0.5, 0.3]];
        assert!(m.grad_check(&batch, 1e-5, 2).unwrap() < 1e-6);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let arch = AeArchitecture::new(vec![5, 4, 2, 4, 5]).unwrap();
        let m = VaeModel::new(arch, 7);
        let batch = vec![
            vec![0.1, 0.5, 0.9, 0.3, 0.7],
            vec![0.8, 0.2, 0.4, 0.6, 0.0],
            vec![1.0, 0.3, 0.3, 0.9, 0.5],
        ];
        assert!(m.grad_check(&batch, 1e-5, 3).unwrap() < 1e-6);
        let arch = AeArchitecture::new(vec![5, 4, 2, 4, 5]).unwrap();
        assert!(vae_grad_check(&arch, &batch, 1e-5, 3).unwrap() < 1e-6);
    }

    #[test]
    fn training_is_deterministic_and_finite() {
        let data: Vec<Vec<f64>> = (0..12)
            .map(|i| {
                let t = i as f64 / 11.0;
                vec![t, 1.0 - t, 0.5, t * t]
            })
            .collect();
        let arch = AeArchitecture::new(vec![4, 3, 2, 3, 4]).unwrap();
        let cfg = TrainConfig {
            epochs: 30,
            learning_rate: 0.02,
            batch_size: 4,
            seed: 9,
            ..TrainConfig::default()
        };
        let (m1, r1) = train_vae(&data, &arch, &cfg).unwrap();
        let (m2, r2) = train_vae(&data, &arch, &cfg).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(r1, r2);
        assert_eq!(r1.train_loss.len(), 30);
        assert!(r1.train_loss.iter().chain(&r1.val_loss).all(|l| l.is_finite()));
        assert!(r1.train_loss.last().unwrap() < &r1.train_loss[0]);
    }
}
