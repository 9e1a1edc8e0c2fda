//! Virtual Big Data synthesis by instance concatenation.

use rand::seq::index;

use crate::error::{Error, Result};
use crate::linalg::dist;
use crate::rng;

/// Settings for random-draw synthesis ([`synth_large`]).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ConcatConfig {
    /// Number of source instances joined per virtual row.
    pub factor: usize,
    /// Number of virtual rows to produce.
    pub size: usize,
    pub seed: u64,
}

impl ConcatConfig {
    pub fn validate(&self) -> Result<()> {
        if self.factor < 2 {
            return Err(Error::InvalidConfig(format!(
                "concatenation factor must be at least 2, got {}",
                self.factor
            )));
        }
        if self.size == 0 {
            return Err(Error::InvalidConfig("virtual set size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Concatenated vectors of dimension `factor * source_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualDataset {
    pub vectors: Vec<Vec<f64>>,
    pub factor: usize,
    pub source_dim: usize,
}

impl VirtualDataset {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.factor * self.source_dim
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct DiversityStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

fn uniform_dim(rows: &[impl AsRef<[f64]>]) -> Result<usize> {
    let d = rows.first().map_or(0, |r| r.as_ref().len());
    for r in rows {
        if r.as_ref().len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: r.as_ref().len(),
            });
        }
    }
    Ok(d)
}

/// Join vectors end to end, preserving order.
pub fn concat(parts: &[&[f64]]) -> Result<Vec<f64>> {
    if parts.is_empty() {
        return Err(Error::invalid("nothing to concatenate"));
    }
    let d = uniform_dim(parts)?;
    let mut out = Vec::with_capacity(parts.len() * d);
    for p in parts {
        out.extend_from_slice(p);
    }
    Ok(out)
}

pub(crate) fn concat2(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    out.extend_from_slice(a);
    out.extend_from_slice(b);
    out
}

/// Every ordered pair `data[i] ⌢ data[j]`, self-pairs included, `i` outer and
/// `j` inner: `n²` rows of dimension `2d`.
pub fn synth_small(data: &[Vec<f64>]) -> Result<VirtualDataset> {
    if data.is_empty() {
        return Err(Error::invalid("cannot synthesize from an empty set"));
    }
    let d = uniform_dim(data)?;
    let mut vectors = Vec::with_capacity(data.len() * data.len());
    for a in data {
        for b in data {
            vectors.push(concat2(a, b));
        }
    }
    Ok(VirtualDataset {
        vectors,
        factor: 2,
        source_dim: d,
    })
}

/// Source indices for each row of [`synth_large`]: `factor` distinct indices
/// per row, drawn independently per row from the stream `(seed, row)`.
pub fn synth_large_indices(n: usize, config: &ConcatConfig) -> Result<Vec<Vec<usize>>> {
    config.validate()?;
    if n < config.factor {
        return Err(Error::TooFewInstances {
            needed: config.factor,
            have: n,
        });
    }
    Ok((0..config.size)
        .map(|row| {
            let mut r = rng::stream(config.seed, "vbd-large", row as u64);
            index::sample(&mut r, n, config.factor).into_vec()
        })
        .collect())
}

/// `size` virtual rows, each the concatenation of `factor` distinct source
/// instances. Rows are drawn independently, so a row may repeat.
pub fn synth_large(data: &[Vec<f64>], config: &ConcatConfig) -> Result<VirtualDataset> {
    let d = uniform_dim(data)?;
    let picks = synth_large_indices(data.len(), config)?;
    let vectors = picks
        .iter()
        .map(|idx| {
            let mut v = Vec::with_capacity(config.factor * d);
            for &i in idx {
                v.extend_from_slice(&data[i]);
            }
            v
        })
        .collect();
    Ok(VirtualDataset {
        vectors,
        factor: config.factor,
        source_dim: d,
    })
}

/// Min, max and mean Euclidean distance over all unordered pairs of rows.
pub fn diversity_stats(vectors: &[Vec<f64>]) -> Result<DiversityStats> {
    if vectors.len() < 2 {
        return Err(Error::TooFewInstances {
            needed: 2,
            have: vectors.len(),
        });
    }
    uniform_dim(vectors)?;
    let mut min = f64::INFINITY;
    let mut max = 0.0f64;
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..vectors.len() {
        for j in i + 1..vectors.len() {
            let d = dist(&vectors[i], &vectors[j]);
            min = min.min(d);
            max = max.max(d);
            sum += d;
            pairs += 1;
        }
    }
    Ok(DiversityStats {
        min,
        max,
        mean: sum / pairs as f64,
    })
}

/// Split a pair-concatenated vector at its midpoint.
pub fn split_halves(v: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if v.len() % 2 != 0 {
        return Err(Error::invalid(format!("cannot halve odd dimension {}", v.len())));
    }
    let (a, b) = v.split_at(v.len() / 2);
    Ok((a.to_vec(), b.to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn concat_examples() {
        assert_eq!(concat(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(concat(&[&[7.0, 8.0]]).unwrap(), vec![7.0, 8.0]);
        assert_eq!(concat(&[&[1.0], &[2.0], &[3.0]]).unwrap().len(), 3);
        assert!(concat(&[&[1.0], &[2.0, 3.0]]).is_err());
        assert!(concat(&[]).is_err());
    }

    #[test]
    fn small_two_points_gives_the_four_pairs() {
        let a = vec![0.0, 1.0];
        let b = vec![5.0, 6.0];
        let v = synth_small(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(
            v.vectors,
            vec![concat2(&a, &a), concat2(&a, &b), concat2(&b, &a), concat2(&b, &b)]
        );
        assert_eq!(v.dim(), 4);
    }

    #[test]
    fn small_sizes() {
        let three = vec![vec![1.0], vec![2.0], vec![3.0]];
        assert_eq!(synth_small(&three).unwrap().len(), 9);
        assert_eq!(synth_small(&[vec![4.0]]).unwrap().vectors, vec![vec![4.0, 4.0]]);
        assert!(synth_small(&[]).is_err());
    }

    #[test]
    fn large_shapes_and_determinism() {
        let data: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64; 4]).collect();
        let cfg = ConcatConfig {
            factor: 2,
            size: 5,
            seed: 3,
        };
        let v = synth_large(&data, &cfg).unwrap();
        assert_eq!(v.len(), 5);
        assert!(v.vectors.iter().all(|r| r.len() == 8));
        assert_eq!(v, synth_large(&data, &cfg).unwrap());

        let two_d: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64, 0.0]).collect();
        let v3 = synth_large(
            &two_d,
            &ConcatConfig {
                factor: 3,
                size: 7,
                seed: 1,
            },
        )
        .unwrap();
        assert!(v3.vectors.iter().all(|r| r.len() == 6));
    }

    #[test]
    fn large_rejects_bad_config() {
        let data = vec![vec![1.0], vec![2.0]];
        assert!(synth_large(
            &data,
            &ConcatConfig {
                factor: 3,
                size: 1,
                seed: 0
            }
        )
        .is_err());
        assert!(synth_large(
            &data,
            &ConcatConfig {
                factor: 2,
                size: 0,
                seed: 0
            }
        )
        .is_err());
        assert!(synth_large(
            &data,
            &ConcatConfig {
                factor: 1,
                size: 1,
                seed: 0
            }
        )
        .is_err());
    }

    #[test]
    fn diversity_of_unit_pair() {
        let s = diversity_stats(&[vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!((s.min, s.max, s.mean), (1.0, 1.0, 1.0));
        assert!(diversity_stats(&[vec![0.0]]).is_err());
    }

    #[test]
    fn diversity_of_vbd_pair_is_sqrt2() {
        let v = synth_small(&[vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let s = diversity_stats(&v.vectors).unwrap();
        assert!((s.max - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn halves() {
        assert_eq!(
            split_halves(&[1.0, 2.0, 3.0, 4.0]).unwrap(),
            (vec![1.0, 2.0], vec![3.0, 4.0])
        );
        assert!(split_halves(&[1.0; 5]).is_err());
    }

    fn dataset() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (1usize..5).prop_flat_map(|d| prop::collection::vec(prop::collection::vec(-10.0f64..10.0, d), 1..12))
    }

    proptest! {
        #[test]
        fn small_rows_are_members(data in dataset()) {
            let v = synth_small(&data).unwrap();
            prop_assert_eq!(v.len(), data.len() * data.len());
            for row in &v.vectors {
                let (a, b) = split_halves(row).unwrap();
                prop_assert!(data.contains(&a) && data.contains(&b));
                prop_assert_eq!(concat(&[&a, &b]).unwrap(), row.clone());
            }
        }

        #[test]
        fn small_is_permutation_covariant(data in dataset(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let mut perm: Vec<usize> = (0..data.len()).collect();
            perm.shuffle(&mut rng::seeded(seed));
            let permuted: Vec<Vec<f64>> = perm.iter().map(|&i| data[i].clone()).collect();
            let n = data.len();
            let orig = synth_small(&data).unwrap();
            let moved = synth_small(&permuted).unwrap();
            for i in 0..n {
                for j in 0..n {
                    prop_assert_eq!(&moved.vectors[i * n + j], &orig.vectors[perm[i] * n + perm[j]]);
                }
            }
        }

        #[test]
        fn large_rows_use_distinct_sources(n in 3usize..30, factor in 2usize..4, size in 1usize..50, seed in any::<u64>()) {
            prop_assume!(n >= factor);
            let picks = synth_large_indices(n, &ConcatConfig { factor, size, seed }).unwrap();
            prop_assert_eq!(picks.len(), size);
            for p in picks {
                let mut s = p.clone();
                s.sort_unstable();
                s.dedup();
                prop_assert_eq!(s.len(), factor);
                prop_assert!(p.iter().all(|&i| i < n));
            }
        }
    }
}
