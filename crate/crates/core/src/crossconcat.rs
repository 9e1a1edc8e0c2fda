//! Cross-concatenation: project a two-class problem into `2d` dimensions
//! where both classes have exactly `M·N` members.
//!
//! Every minority instance `u_i` is paired with every majority instance
//! `v_j`. The projected minority class holds `u_i ⌢ v_j`, the projected
//! majority class holds `v_j ⌢ u_i`. A test point `t` is classified through
//! two probes built from the class centroids: `w = t ⌢ c_u` matches the
//! projected-majority layout `v ⌢ u` and `z = t ⌢ c_v` matches the
//! projected-minority layout `u ⌢ v`. The point is labeled majority when the
//! base model's majority probability on `w` exceeds its minority probability
//! on `z`. Nothing here draws random numbers.

use crate::dataset::{centroid, LabeledDataset, NormalizationStats};
use crate::error::{Error, Result};
use crate::linalg::sq_dist;
use crate::models::{fit_rows, ClassifierSpec, TrainedClassifier};
use crate::vbd::concat2;

/// Class label of projected minority rows; projected majority rows get 0.
pub const PROJECTED_MINORITY: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedPair {
    /// `u_i ⌢ v_j`, minority-outer / majority-inner order.
    pub projected_minority: Vec<Vec<f64>>,
    /// `v_j ⌢ u_i`, same pair order as `projected_minority`.
    pub projected_majority: Vec<Vec<f64>>,
    pub source_dim: usize,
}

impl ProjectedPair {
    pub fn len(&self) -> usize {
        self.projected_minority.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projected_minority.is_empty()
    }

    /// Both projected classes as one labeled set: minority rows first,
    /// labeled [`PROJECTED_MINORITY`].
    pub fn to_labeled(&self) -> LabeledDataset {
        let rows: Vec<Vec<f64>> = self
            .projected_minority
            .iter()
            .chain(&self.projected_majority)
            .cloned()
            .collect();
        let mut labels = vec![PROJECTED_MINORITY; self.len()];
        labels.extend(std::iter::repeat_n(0, self.len()));
        LabeledDataset::with_dim(rows, labels, 2 * self.source_dim).expect("projected rows are uniform")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct CrossConcatOptions {
    /// Keep at most this many `(i, j)` pairs, chosen by a fixed stride over
    /// the full product. `None` keeps every pair.
    pub max_pairs: Option<usize>,
}

fn check_classes(minority: &[Vec<f64>], majority: &[Vec<f64>]) -> Result<usize> {
    if minority.is_empty() || majority.is_empty() {
        return Err(Error::invalid("both classes need at least one instance"));
    }
    let d = minority[0].len();
    for r in minority.iter().chain(majority) {
        if r.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: r.len(),
            });
        }
    }
    Ok(d)
}

/// `(minority index, majority index)` pairs in minority-outer order. With a
/// cap `c < M·N`, pair number `⌊k·M·N / c⌋` is kept for `k = 0..c`.
pub fn pair_indices(m: usize, n: usize, max_pairs: Option<usize>) -> Vec<(usize, usize)> {
    let total = m * n;
    match max_pairs {
        Some(cap) if cap < total => (0..cap)
            .map(|k| {
                let flat = ((k as u128 * total as u128) / cap as u128) as usize;
                (flat / n, flat % n)
            })
            .collect(),
        _ => (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect(),
    }
}

pub fn cross_concatenate(minority: &[Vec<f64>], majority: &[Vec<f64>]) -> Result<ProjectedPair> {
    cross_concatenate_with(minority, majority, &CrossConcatOptions::default())
}

pub fn cross_concatenate_with(
    minority: &[Vec<f64>],
    majority: &[Vec<f64>],
    options: &CrossConcatOptions,
) -> Result<ProjectedPair> {
    let d = check_classes(minority, majority)?;
    if options.max_pairs == Some(0) {
        return Err(Error::InvalidConfig("max_pairs must be at least 1".into()));
    }
    let pairs = pair_indices(minority.len(), majority.len(), options.max_pairs);
    let mut projected_minority = Vec::with_capacity(pairs.len());
    let mut projected_majority = Vec::with_capacity(pairs.len());
    for (i, j) in pairs {
        projected_minority.push(concat2(&minority[i], &majority[j]));
        projected_majority.push(concat2(&majority[j], &minority[i]));
    }
    Ok(ProjectedPair {
        projected_minority,
        projected_majority,
        source_dim: d,
    })
}

/// Test-time probes `(w, z) = (t ⌢ c_u, t ⌢ c_v)`.
pub fn project_test(t: &[f64], minority_centroid: &[f64], majority_centroid: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    for c in [minority_centroid, majority_centroid] {
        if c.len() != t.len() {
            return Err(Error::DimensionMismatch {
                expected: t.len(),
                actual: c.len(),
            });
        }
    }
    Ok((concat2(t, minority_centroid), concat2(t, majority_centroid)))
}

/// A base classifier trained on a projected pair plus the original-space
/// class centroids used to build test probes.
#[derive(Debug, Clone, PartialEq)]
pub struct CcModel {
    pub base: TrainedClassifier,
    pub minority_centroid: Vec<f64>,
    pub majority_centroid: Vec<f64>,
    /// Normalization fitted on the original training rows, when the caller
    /// normalized before fitting.
    pub normalization: Option<NormalizationStats>,
    /// Number of rows the base model was trained on (`2·M·N` uncapped).
    pub training_rows: usize,
}

impl CcModel {
    pub fn source_dim(&self) -> usize {
        self.minority_centroid.len()
    }
}

pub fn cc_fit(
    spec: &ClassifierSpec,
    minority: &[Vec<f64>],
    majority: &[Vec<f64>],
    options: &CrossConcatOptions,
) -> Result<CcModel> {
    let pair = cross_concatenate_with(minority, majority, options)?;
    let (rows, labels) = pair.to_labeled().into_parts();
    let base = fit_rows(spec, &rows, &labels)?;
    Ok(CcModel {
        base,
        minority_centroid: centroid(minority)?,
        majority_centroid: centroid(majority)?,
        normalization: None,
        training_rows: rows.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CcPrediction {
    /// 1 for minority, 0 for majority.
    pub label: u8,
    /// Majority-class probability of the `t ⌢ c_u` probe.
    pub p_w: f64,
    /// Minority-class probability of the `t ⌢ c_v` probe.
    pub p_z: f64,
}

impl CcPrediction {
    /// Score in [0, 1] that increases with the evidence for the minority
    /// class; `≥ 0.5` exactly when the label is 1.
    pub fn minority_score(&self) -> f64 {
        (self.p_z - self.p_w + 1.0) / 2.0
    }
}

/// Majority (0) when `p_w > p_z`, minority (1) otherwise, ties included.
pub fn decide(p_w: f64, p_z: f64) -> u8 {
    if p_w > p_z {
        0
    } else {
        1
    }
}

pub fn cc_predict(model: &CcModel, t: &[f64]) -> Result<CcPrediction> {
    if t.len() != model.source_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.source_dim(),
            actual: t.len(),
        });
    }
    let (w, z) = project_test(t, &model.minority_centroid, &model.majority_centroid)?;
    // the base model's class 1 is the projected minority
    let p_w = 1.0 - model.base.predict_proba(&w)?;
    let p_z = model.base.predict_proba(&z)?;
    Ok(CcPrediction {
        label: decide(p_w, p_z),
        p_w,
        p_z,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MarginStats {
    /// Smallest minority-to-majority distance in the original space.
    pub original_min: f64,
    /// Smallest projected-minority to projected-majority distance.
    pub projected_min: f64,
    /// `projected_min / original_min` (NaN when the original minimum is 0).
    pub ratio: f64,
    /// Within-class minima (original, projected), when the class has at
    /// least two members. Reported, not guaranteed to be preserved.
    pub minority_within: Option<(f64, f64)>,
    pub majority_within: Option<(f64, f64)>,
}

fn min_cross(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flat_map(|x| b.iter().map(move |y| sq_dist(x, y)))
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

fn min_within(a: &[Vec<f64>]) -> Option<f64> {
    if a.len() < 2 {
        return None;
    }
    let mut best = f64::INFINITY;
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            best = best.min(sq_dist(&a[i], &a[j]));
        }
    }
    Some(best.sqrt())
}

/// Brute-force cross-class and within-class minimum distances before and
/// after projection. Quadratic in `M·N`; meant for diagnostics on modest
/// class sizes.
pub fn margin_stats(minority: &[Vec<f64>], majority: &[Vec<f64>]) -> Result<MarginStats> {
    let pair = cross_concatenate(minority, majority)?;
    let original_min = min_cross(minority, majority);
    let projected_min = min_cross(&pair.projected_minority, &pair.projected_majority);
    let within = |orig: &[Vec<f64>], proj: &[Vec<f64>]| min_within(orig).zip(min_within(proj));
    Ok(MarginStats {
        original_min,
        projected_min,
        ratio: if original_min > 0.0 {
            projected_min / original_min
        } else {
            f64::NAN
        },
        minority_within: within(minority, &pair.projected_minority),
        majority_within: within(majority, &pair.projected_majority),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ClassifierKind;
    use proptest::prelude::*;

    fn pts(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn sizes_and_dimension() {
        let minority: Vec<Vec<f64>> = (0..3).map(|i| vec![i as f64; 4]).collect();
        let majority: Vec<Vec<f64>> = (0..5).map(|i| vec![10.0 + i as f64; 4]).collect();
        let p = cross_concatenate(&minority, &majority).unwrap();
        assert_eq!(p.projected_minority.len(), 15);
        assert_eq!(p.projected_majority.len(), 15);
        assert!(p
            .projected_minority
            .iter()
            .chain(&p.projected_majority)
            .all(|r| r.len() == 8));
        // minority-outer enumeration
        assert_eq!(p.projected_minority[1], concat2(&minority[0], &majority[1]));
        assert_eq!(p.projected_majority[5], concat2(&majority[0], &minority[1]));
    }

    #[test]
    fn one_by_one() {
        let p = cross_concatenate(&pts(&[0.0]), &pts(&[1.0])).unwrap();
        assert_eq!(p.projected_minority, vec![vec![0.0, 1.0]]);
        assert_eq!(p.projected_majority, vec![vec![1.0, 0.0]]);
    }

    #[test]
    fn empty_class_fails() {
        assert!(cross_concatenate(&[], &pts(&[1.0])).is_err());
        assert!(cross_concatenate(&pts(&[1.0]), &[]).is_err());
        let spec = ClassifierSpec::new(ClassifierKind::Logistic);
        assert!(cc_fit(&spec, &[], &pts(&[1.0]), &CrossConcatOptions::default()).is_err());
    }

    #[test]
    fn probes() {
        let (w, z) = project_test(&[5.0], &[0.0], &[1.0]).unwrap();
        assert_eq!((w, z), (vec![5.0, 0.0], vec![5.0, 1.0]));
        let (w, z) = project_test(&[1.0, 2.0, 3.0], &[0.0; 3], &[1.0; 3]).unwrap();
        assert_eq!((w.len(), z.len()), (6, 6));
        let t = [0.3, 0.4];
        let (w, z) = project_test(&t, &t, &t).unwrap();
        assert_eq!(w, z);
        assert!(project_test(&[1.0], &[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn decision_rule() {
        assert_eq!(decide(0.7, 0.4), 0);
        assert_eq!(decide(0.4, 0.4), 1);
        assert_eq!(decide(0.4, 0.7), 1);
    }

    #[test]
    fn capped_pairs_are_strided_and_deterministic() {
        let all = pair_indices(4, 5, None);
        assert_eq!(all.len(), 20);
        let capped = pair_indices(4, 5, Some(5));
        assert_eq!(capped, vec![(0, 0), (0, 4), (1, 3), (2, 2), (3, 1)]);
        assert_eq!(pair_indices(4, 5, Some(100)), all);
    }

    #[test]
    fn training_set_size_for_two_by_two() {
        let spec = ClassifierSpec::new(ClassifierKind::Logistic);
        let m = cc_fit(
            &spec,
            &pts(&[0.0, 0.1]),
            &pts(&[0.9, 1.0]),
            &CrossConcatOptions::default(),
        )
        .unwrap();
        assert_eq!(m.training_rows, 8);
        let pair = cross_concatenate(&pts(&[0.0, 0.1]), &pts(&[0.9, 1.0])).unwrap();
        assert_eq!(pair.to_labeled().positive_count(), 4);
    }

    #[test]
    fn toy_logistic_labels_minority_point() {
        let mut spec = ClassifierSpec::new(ClassifierKind::Logistic);
        spec.learning_rate = 0.5;
        spec.epochs = 500;
        spec.batch_size = 8;
        let minority = pts(&[0.0, 0.1]);
        let majority = pts(&[0.9, 1.0]);
        let m = cc_fit(&spec, &minority, &majority, &CrossConcatOptions::default()).unwrap();
        let p = cc_predict(&m, &[0.05]).unwrap();
        assert_eq!(p.label, 1, "{p:?}");
        let q = cc_predict(&m, &[0.95]).unwrap();
        assert_eq!(q.label, 0, "{q:?}");
        assert_eq!(p, cc_predict(&m, &[0.05]).unwrap());
        assert!(cc_predict(&m, &[0.05, 0.0]).is_err());
    }

    #[test]
    fn margin_of_unit_pair() {
        let s = margin_stats(&pts(&[0.0]), &pts(&[1.0])).unwrap();
        assert_eq!(s.original_min, 1.0);
        assert!((s.projected_min - 2f64.sqrt()).abs() < 1e-15);
        let s = margin_stats(&pts(&[0.5, 2.0]), &pts(&[0.5])).unwrap();
        assert_eq!((s.original_min, s.projected_min), (0.0, 0.0));
        assert!(s.ratio.is_nan());
    }

    proptest! {
        #[test]
        fn balanced_for_all_sizes(m in 1usize..12, n in 1usize..12) {
            let minority: Vec<Vec<f64>> = (0..m).map(|i| vec![i as f64]).collect();
            let majority: Vec<Vec<f64>> = (0..n).map(|i| vec![-(i as f64)]).collect();
            let p = cross_concatenate(&minority, &majority).unwrap();
            prop_assert_eq!(p.projected_minority.len(), m * n);
            prop_assert_eq!(p.projected_majority.len(), m * n);
            for row in &p.projected_minority {
                prop_assert!(minority.contains(&row[..1].to_vec()));
            }
            for row in &p.projected_majority {
                prop_assert!(majority.contains(&row[..1].to_vec()));
            }
        }

        #[test]
        fn swapping_probabilities_flips_label(a in 0.0f64..1.0, b in 0.0f64..1.0) {
            prop_assume!(a != b);
            prop_assert_ne!(decide(a, b), decide(b, a));
        }
    }
}
