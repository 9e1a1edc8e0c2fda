use super::LabeledDataset;
use crate::error::{Error, Result};

/// Per-feature min/max observed on a fitting set.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NormalizationStats {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    /// Features whose observed range is zero; these always map to 0.
    pub constant: Vec<bool>,
}

impl NormalizationStats {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::invalid("cannot fit normalization on an empty set"))?;
        let d = first.len();
        let mut min = first.clone();
        let mut max = first.clone();
        for row in rows {
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: row.len(),
                });
            }
            for j in 0..d {
                min[j] = min[j].min(row[j]);
                max[j] = max[j].max(row[j]);
            }
        }
        let constant = min.iter().zip(&max).map(|(a, b)| a == b).collect();
        Ok(NormalizationStats { min, max, constant })
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    /// Map one row into [0, 1], clamping values outside the fitted range.
    pub fn apply_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: row.len(),
            });
        }
        Ok(row
            .iter()
            .enumerate()
            .map(|(j, &v)| {
                if self.constant[j] {
                    0.0
                } else {
                    ((v - self.min[j]) / (self.max[j] - self.min[j])).clamp(0.0, 1.0)
                }
            })
            .collect())
    }

    pub fn apply_rows(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.apply_row(r)).collect()
    }

    pub fn apply(&self, data: &LabeledDataset) -> Result<LabeledDataset> {
        if data.feature_count() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: data.feature_count(),
            });
        }
        let rows = self.apply_rows(data.features())?;
        LabeledDataset::with_dim(rows, data.labels().to_vec(), self.dim())
    }
}

/// Fit min-max statistics on `fit_on` and apply them to `apply_to`.
pub fn fit_apply_minmax(
    fit_on: &LabeledDataset,
    apply_to: &LabeledDataset,
) -> Result<(NormalizationStats, LabeledDataset)> {
    if fit_on.feature_count() != apply_to.feature_count() {
        return Err(Error::DimensionMismatch {
            expected: fit_on.feature_count(),
            actual: apply_to.feature_count(),
        });
    }
    let stats = NormalizationStats::fit(fit_on.features())?;
    let out = stats.apply(apply_to)?;
    Ok((stats, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn column(values: &[f64]) -> LabeledDataset {
        LabeledDataset::new(values.iter().map(|&v| vec![v]).collect(), vec![0; values.len()]).unwrap()
    }

    #[test]
    fn maps_range_to_unit_interval() {
        let d = column(&[2.0, 4.0, 6.0]);
        let (_, out) = fit_apply_minmax(&d, &d).unwrap();
        assert_eq!(out.features(), &[vec![0.0], vec![0.5], vec![1.0]]);
    }

    #[test]
    fn constant_feature_maps_to_zero() {
        let d = column(&[5.0, 5.0]);
        let (stats, out) = fit_apply_minmax(&d, &d).unwrap();
        assert_eq!(stats.constant, vec![true]);
        assert_eq!(out.features(), &[vec![0.0], vec![0.0]]);
    }

    #[test]
    fn out_of_range_values_clamp() {
        let (_, out) = fit_apply_minmax(&column(&[2.0, 6.0]), &column(&[8.0, -1.0])).unwrap();
        assert_eq!(out.features(), &[vec![1.0], vec![0.0]]);
    }

    #[test]
    fn dimension_mismatch() {
        let two = LabeledDataset::new(vec![vec![1.0, 2.0]], vec![0]).unwrap();
        assert!(fit_apply_minmax(&column(&[1.0]), &two).is_err());
    }

    proptest! {
        #[test]
        fn fitting_set_lands_in_unit_interval(rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 4), 1..40)) {
            let d = LabeledDataset::new(rows.clone(), vec![0; rows.len()]).unwrap();
            let (_, out) = fit_apply_minmax(&d, &d).unwrap();
            prop_assert!(out.features().iter().flatten().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
