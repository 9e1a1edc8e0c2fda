//! Labeled binary datasets: ingestion, normalization, class splitting and
//! stratified folding.

mod csv;
mod folds;
mod idx;
mod normalize;

pub use self::csv::{
    load_csv, load_features_csv, parse_csv, parse_features_csv, write_csv, write_vectors_csv, CsvOptions, LabelColumn,
};
pub use folds::{stratified_kfold, FoldPlan};
pub use idx::{load_idx, parse_idx_images, parse_idx_labels, IdxImages};
pub use normalize::{fit_apply_minmax, NormalizationStats};

use crate::error::{Error, Result};

/// A row-major feature matrix with one binary label per row.
///
/// Label 1 is the positive (minority) class, label 0 the negative class.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Vec<Vec<f64>>,
    labels: Vec<u8>,
    feature_count: usize,
}

impl LabeledDataset {
    /// Build a dataset, checking that rows are uniform and finite and that
    /// labels are binary.
    ///
    /// `feature_count` is taken from the first row; an empty dataset needs it
    /// explicitly, see [`LabeledDataset::empty`].
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<u8>) -> Result<Self> {
        let feature_count = features.first().map_or(0, Vec::len);
        Self::with_dim(features, labels, feature_count)
    }

    pub fn empty(feature_count: usize) -> Self {
        LabeledDataset {
            features: Vec::new(),
            labels: Vec::new(),
            feature_count,
        }
    }

    pub fn with_dim(features: Vec<Vec<f64>>, labels: Vec<u8>, feature_count: usize) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::invalid(format!(
                "{} feature rows but {} labels",
                features.len(),
                labels.len()
            )));
        }
        for (i, row) in features.iter().enumerate() {
            if row.len() != feature_count {
                return Err(Error::DimensionMismatch {
                    expected: feature_count,
                    actual: row.len(),
                });
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("non-finite value at row {i}, feature {j}")));
            }
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::invalid(format!("label {bad} is not binary")));
        }
        Ok(LabeledDataset {
            features,
            labels,
            feature_count,
        })
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    pub fn instance_count(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn positive_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    /// Rows selected by index, in the given order.
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            feature_count: self.feature_count,
        }
    }

    /// Feature rows carrying `label`.
    pub fn rows_with_label(&self, label: u8) -> Vec<Vec<f64>> {
        self.features
            .iter()
            .zip(&self.labels)
            .filter(|(_, &l)| l == label)
            .map(|(r, _)| r.clone())
            .collect()
    }

    pub fn into_parts(self) -> (Vec<Vec<f64>>, Vec<u8>) {
        (self.features, self.labels)
    }
}

/// A binary dataset separated into its minority and majority classes.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarySplit {
    pub minority: Vec<Vec<f64>>,
    pub majority: Vec<Vec<f64>>,
    /// Label carried by the minority rows in the source dataset.
    pub minority_label: u8,
}

/// Separate a dataset into minority and majority class rows.
///
/// The minority is the smaller class by count. On a tie the positive class
/// (label 1) is the minority.
pub fn split_binary(data: &LabeledDataset) -> Result<BinarySplit> {
    let positives = data.positive_count();
    let negatives = data.instance_count() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass);
    }
    let minority_label = if positives <= negatives { 1 } else { 0 };
    Ok(BinarySplit {
        minority: data.rows_with_label(minority_label),
        majority: data.rows_with_label(1 - minority_label),
        minority_label,
    })
}

/// Per-feature arithmetic mean of a non-empty set of equal-length vectors.
pub fn centroid(instances: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = instances
        .first()
        .ok_or_else(|| Error::invalid("centroid of an empty set"))?;
    let d = first.len();
    let mut sum = vec![0.0; d];
    for row in instances {
        if row.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: row.len(),
            });
        }
        for (s, v) in sum.iter_mut().zip(row) {
            *s += v;
        }
    }
    let n = instances.len() as f64;
    Ok(sum.into_iter().map(|s| s / n).collect())
}
