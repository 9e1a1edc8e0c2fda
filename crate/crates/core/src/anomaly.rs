//! Anomaly detection by counting reconstruction contests.
//!
//! A model trained on VBD built from normal data reconstructs a pair of
//! normal instances well. For a test instance `t` we draw `u` normal
//! instances `P_i` and `u` more `Q_i`, and compare the error on `t ⌢ P_i`
//! against the error on the all-normal pair `P_i ⌢ Q_i`. When `t` loses more
//! than `w` of the `u` contests it is flagged as anomalous.

use std::io::Write;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autoencoder::AeModel;
use crate::error::{Error, Result};
use crate::eval::{confusion, MetricsReport};
use crate::rng;
use crate::vbd::concat2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnomalyConfig {
    /// Number of reconstruction contests per test instance.
    pub u: usize,
    /// Contests `t` may lose before it is flagged.
    pub w: usize,
    pub seed: u64,
}

impl AnomalyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.u == 0 {
            return Err(Error::InvalidConfig("u must be at least 1".into()));
        }
        if self.w == 0 || self.w > self.u {
            return Err(Error::InvalidConfig(format!(
                "w must lie in 1..=u (u = {}), got {}",
                self.u, self.w
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnomalyVerdict {
    /// Contests in which `t ⌢ P_i` reconstructed worse than `P_i ⌢ Q_i`.
    pub count: usize,
    pub u: usize,
    pub is_anomaly: bool,
}

impl AnomalyVerdict {
    /// The verdict the same contests give under threshold `w`.
    pub fn at(&self, w: usize) -> AnomalyVerdict {
        AnomalyVerdict {
            is_anomaly: self.count > w,
            ..*self
        }
    }
}

fn check_inputs(model: &AeModel, normal: &[Vec<f64>], u: usize) -> Result<usize> {
    let d = model.input_dim() / 2;
    if model.input_dim() % 2 != 0 {
        return Err(Error::invalid(format!(
            "model input dimension {} is not a pair of instances",
            model.input_dim()
        )));
    }
    if normal.len() < u {
        return Err(Error::TooFewInstances {
            needed: u,
            have: normal.len(),
        });
    }
    if let Some(r) = normal.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: r.len(),
        });
    }
    Ok(d)
}

fn contests(model: &AeModel, normal: &[Vec<f64>], t: &[f64], u: usize, rng: &mut rng::Rng) -> Result<usize> {
    let p = index::sample(rng, normal.len(), u);
    let q = index::sample(rng, normal.len(), u);
    let mut count = 0;
    for (pi, qi) in p.iter().zip(q.iter()) {
        let with_t = model.reconstruction_error(&concat2(t, &normal[pi]))?;
        let baseline = model.reconstruction_error(&concat2(&normal[pi], &normal[qi]))?;
        if with_t > baseline {
            count += 1;
        }
    }
    Ok(count)
}

/// Judge one test instance against the normal reference set. `P` and `Q`
/// are each drawn without replacement, independently of one another.
pub fn detect(model: &AeModel, normal: &[Vec<f64>], t: &[f64], config: &AnomalyConfig) -> Result<AnomalyVerdict> {
    config.validate()?;
    let d = check_inputs(model, normal, config.u)?;
    if t.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: t.len(),
        });
    }
    let count = contests(model, normal, t, config.u, &mut rng::stream(config.seed, "anomaly", 0))?;
    Ok(AnomalyVerdict {
        count,
        u: config.u,
        is_anomaly: count > config.w,
    })
}

/// [`detect`] over many test instances. Instance `i` draws its references
/// from its own stream, so verdicts do not depend on order or threading.
pub fn detect_all(
    model: &AeModel,
    normal: &[Vec<f64>],
    tests: &[Vec<f64>],
    config: &AnomalyConfig,
) -> Result<Vec<AnomalyVerdict>> {
    config.validate()?;
    let d = check_inputs(model, normal, config.u)?;
    tests
        .par_iter()
        .enumerate()
        .map(|(i, t)| {
            if t.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: t.len(),
                });
            }
            let count = contests(
                model,
                normal,
                t,
                config.u,
                &mut rng::stream(config.seed, "anomaly", i as u64),
            )?;
            Ok(AnomalyVerdict {
                count,
                u: config.u,
                is_anomaly: count > config.w,
            })
        })
        .collect()
}

/// Baseline: flag `t` when a model trained on the original data
/// reconstructs it with error above `tau`.
pub fn detect_traditional(model: &AeModel, t: &[f64], tau: f64) -> Result<bool> {
    Ok(model.reconstruction_error(t)? > tau)
}

/// Score detector output with normal instances as the positive class: a
/// normal instance that is not flagged is a true positive.
pub fn evaluate_detector(is_normal: &[bool], flagged: &[bool]) -> Result<MetricsReport> {
    if !is_normal.contains(&true) || !is_normal.contains(&false) {
        return Err(Error::invalid(
            "detector evaluation needs both normal and anomalous instances",
        ));
    }
    let truth: Vec<u8> = is_normal.iter().map(|&n| u8::from(n)).collect();
    let pred: Vec<u8> = flagged.iter().map(|&f| u8::from(!f)).collect();
    Ok(MetricsReport::from_confusion(confusion(&truth, &pred)?, None))
}

/// Metrics of every threshold `w = 1..=u` applied to fixed contest counts.
pub fn sweep_w(verdicts: &[AnomalyVerdict], is_normal: &[bool]) -> Result<Vec<(usize, MetricsReport)>> {
    let u = verdicts.first().map_or(0, |v| v.u);
    (1..=u)
        .map(|w| {
            let flagged: Vec<bool> = verdicts.iter().map(|v| v.at(w).is_anomaly).collect();
            Ok((w, evaluate_detector(is_normal, &flagged)?))
        })
        .collect()
}

/// Best-F1 error threshold for the traditional detector. Candidates are
/// midpoints between consecutive distinct scores plus one value below and
/// one above all scores; ties keep the smallest threshold.
pub fn sweep_tau(errors: &[f64], is_normal: &[bool]) -> Result<(f64, MetricsReport)> {
    if errors.is_empty() {
        return Err(Error::invalid("no reconstruction errors to sweep"));
    }
    let mut sorted: Vec<f64> = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut candidates = vec![sorted[0] - 1.0];
    candidates.extend(sorted.windows(2).map(|p| (p[0] + p[1]) / 2.0));
    candidates.push(sorted[sorted.len() - 1] + 1.0);
    let mut best: Option<(f64, MetricsReport)> = None;
    for tau in candidates {
        let flagged: Vec<bool> = errors.iter().map(|&e| e > tau).collect();
        let m = evaluate_detector(is_normal, &flagged)?;
        if best.as_ref().is_none_or(|(_, b)| m.f1 > b.f1) {
            best = Some((tau, m));
        }
    }
    Ok(best.expect("at least two candidates"))
}

/// Columns `index,count,u,anomaly` plus `normal` when ground truth is given.
pub fn write_verdicts_csv<W: Write>(
    mut out: W,
    verdicts: &[AnomalyVerdict],
    is_normal: Option<&[bool]>,
    preamble: &[String],
) -> std::io::Result<()> {
    for line in preamble {
        writeln!(out, "# {line}")?;
    }
    write!(out, "index,count,u,anomaly")?;
    if is_normal.is_some() {
        write!(out, ",normal")?;
    }
    writeln!(out)?;
    for (i, v) in verdicts.iter().enumerate() {
        write!(out, "{i},{},{},{}", v.count, v.u, u8::from(v.is_anomaly))?;
        if let Some(n) = is_normal {
            write!(out, ",{}", u8::from(n[i]))?;
        }
        writeln!(out)?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autoencoder::{AeArchitecture, AeModel};
    use crate::nn::{Activation, Dense, DenseNet};

    /// A 4-1-4 model whose output is 0.5 everywhere: the error of a pair is
    /// its mean squared distance from 0.5.
    fn flat_model() -> AeModel {
        let arch = AeArchitecture::new(vec![4, 1, 4]).unwrap();
        let net = DenseNet {
            layers: vec![
                Dense::zeros(4, 1, Activation::Relu),
                Dense::zeros(1, 4, Activation::Sigmoid),
            ],
        };
        AeModel::from_parts(arch, net).unwrap()
    }

    fn normal() -> Vec<Vec<f64>> {
        (0..10).map(|i| vec![0.45 + 0.01 * i as f64, 0.5]).collect()
    }

    #[test]
    fn far_point_loses_every_contest() {
        let m = flat_model();
        let cfg = AnomalyConfig { u: 5, w: 2, seed: 1 };
        let v = detect(&m, &normal(), &[1.0, 0.0], &cfg).unwrap();
        assert_eq!(v.count, 5);
        assert!(v.is_anomaly);
        let near = detect(&m, &normal(), &[0.5, 0.5], &cfg).unwrap();
        assert!(!near.is_anomaly);
    }

    #[test]
    fn config_validation() {
        let m = flat_model();
        for (u, w) in [(0, 0), (3, 4), (3, 0)] {
            let cfg = AnomalyConfig { u, w, seed: 0 };
            assert!(detect(&m, &normal(), &[0.5, 0.5], &cfg).is_err());
        }
        let too_many = AnomalyConfig { u: 11, w: 1, seed: 0 };
        assert!(detect(&m, &normal(), &[0.5, 0.5], &too_many).is_err());
        let cfg = AnomalyConfig { u: 3, w: 1, seed: 0 };
        assert!(detect(&m, &normal(), &[0.5], &cfg).is_err());
    }

    #[test]
    fn batch_is_deterministic_and_order_free() {
        let m = flat_model();
        let cfg = AnomalyConfig { u: 4, w: 2, seed: 3 };
        let tests = vec![vec![0.5, 0.5], vec![0.9, 0.1], vec![0.47, 0.52]];
        let a = detect_all(&m, &normal(), &tests, &cfg).unwrap();
        let b = detect_all(&m, &normal(), &tests, &cfg).unwrap();
        assert_eq!(a, b);
        let single = detect_all(&m, &normal(), &tests[..1], &cfg).unwrap();
        assert_eq!(single[0], a[0]);
    }

    #[test]
    fn sweep_w_flags_fewer_as_w_grows() {
        let verdicts: Vec<AnomalyVerdict> = [0, 1, 3, 5, 5, 2]
            .iter()
            .map(|&count| AnomalyVerdict {
                count,
                u: 5,
                is_anomaly: false,
            })
            .collect();
        let normal = [true, true, false, false, false, true];
        let sweep = sweep_w(&verdicts, &normal).unwrap();
        assert_eq!(sweep.len(), 5);
        let flagged: Vec<usize> = sweep.iter().map(|(_, m)| m.confusion.fp + m.confusion.tn).collect();
        assert!(flagged.windows(2).all(|p| p[0] >= p[1]));
        // w = 2 flags counts 3, 5, 5 exactly
        assert_eq!(sweep[1].1.f1, 1.0);
    }

    #[test]
    fn evaluation_treats_normal_as_positive() {
        let r = evaluate_detector(&[true, true, false, false], &[false, true, true, false]).unwrap();
        assert_eq!(
            (r.confusion.tp, r.confusion.fn_, r.confusion.tn, r.confusion.fp),
            (1, 1, 1, 1)
        );
        let all_flagged = evaluate_detector(&[true, false], &[true, true]).unwrap();
        assert_eq!(all_flagged.recall, 0.0);
        let perfect = evaluate_detector(&[true, false], &[false, true]).unwrap();
        assert_eq!((perfect.precision, perfect.recall, perfect.f1), (1.0, 1.0, 1.0));
        assert!(evaluate_detector(&[true, true], &[false, false]).is_err());
        assert!(evaluate_detector(&[], &[]).is_err());
    }

    #[test]
    fn tau_sweep_finds_separating_threshold() {
        let errors = [0.01, 0.02, 0.5, 0.03, 0.7];
        let normal = [true, true, false, true, false];
        let (tau, m) = sweep_tau(&errors, &normal).unwrap();
        assert!(tau > 0.03 && tau < 0.5);
        assert_eq!(m.f1, 1.0);
        assert!(detect_traditional(&flat_model(), &[0.5, 0.5, 0.5, 0.5], 0.0).is_ok());
    }

    #[test]
    fn verdict_csv() {
        let v = [AnomalyVerdict {
            count: 3,
            u: 4,
            is_anomaly: true,
        }];
        let mut buf = Vec::new();
        write_verdicts_csv(&mut buf, &v, Some(&[false]), &[]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "index,count,u,anomaly,normal\n0,3,4,1,0\n"
        );
    }
}
