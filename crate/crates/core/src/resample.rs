//! Minority oversampling baselines: SMOTE and random duplication.

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::linalg::sq_dist;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SmoteConfig {
    /// Neighbors considered per base point.
    pub k: usize,
    pub n_synthetic: usize,
    pub seed: u64,
}

/// One synthetic point and where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoteSample {
    pub point: Vec<f64>,
    pub base: usize,
    pub neighbor: usize,
    /// Interpolation coefficient in [0, 1).
    pub gap: f64,
}

/// `base + gap · (neighbor - base)`.
pub fn interpolate(base: &[f64], neighbor: &[f64], gap: f64) -> Vec<f64> {
    base.iter().zip(neighbor).map(|(b, n)| b + gap * (n - b)).collect()
}

/// Indices of the `k` nearest other points to `points[i]` (Euclidean), ties
/// broken by lower index.
pub fn nearest_neighbors(points: &[Vec<f64>], i: usize, k: usize) -> Vec<usize> {
    let mut cand: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(j, p)| (sq_dist(&points[i], p), j))
        .collect();
    cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    cand.truncate(k);
    cand.into_iter().map(|(_, j)| j).collect()
}

/// SMOTE with recorded provenance. Synthetic point `s` uses base point
/// `s mod M`; its partner is drawn uniformly from the base point's `k`
/// nearest minority neighbors and the gap uniformly from [0, 1).
pub fn smote_traced(minority: &[Vec<f64>], config: &SmoteConfig) -> Result<Vec<SmoteSample>> {
    if config.k == 0 {
        return Err(Error::InvalidConfig("SMOTE needs k >= 1".into()));
    }
    if minority.len() <= config.k {
        return Err(Error::TooFewInstances {
            needed: config.k + 1,
            have: minority.len(),
        });
    }
    let d = minority[0].len();
    if let Some(r) = minority.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: r.len(),
        });
    }
    if config.n_synthetic == 0 {
        return Ok(Vec::new());
    }
    let neighbors: Vec<Vec<usize>> = (0..minority.len().min(config.n_synthetic))
        .map(|i| nearest_neighbors(minority, i, config.k))
        .collect();
    let mut r = rng::stream(config.seed, "smote", 0);
    Ok((0..config.n_synthetic)
        .map(|s| {
            let base = s % minority.len();
            let neighbor = neighbors[base][r.random_range(0..config.k)];
            let gap: f64 = r.random();
            SmoteSample {
                point: interpolate(&minority[base], &minority[neighbor], gap),
                base,
                neighbor,
                gap,
            }
        })
        .collect())
}

pub fn smote(minority: &[Vec<f64>], config: &SmoteConfig) -> Result<Vec<Vec<f64>>> {
    Ok(smote_traced(minority, config)?.into_iter().map(|s| s.point).collect())
}

/// `n_needed` rows drawn uniformly with replacement from `minority`.
pub fn random_oversample(minority: &[Vec<f64>], n_needed: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if minority.is_empty() {
        return Err(Error::invalid("cannot oversample an empty class"));
    }
    let mut r = rng::stream(seed, "random-oversample", 0);
    Ok((0..n_needed)
        .map(|_| minority[r.random_range(0..minority.len())].clone())
        .collect())
}
