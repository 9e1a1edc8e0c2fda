use rand::seq::SliceRandom;

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng;

/// Assignment of every instance to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignments: Vec<usize>,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }
}

/// Stratified k-fold assignment.
///
/// Each class is shuffled with the seeded RNG; the positives and then the
/// negatives are dealt round-robin into folds, with the negatives continuing
/// from where the positives stopped. Every fold therefore holds
/// `floor(n_pos / k)` or `ceil(n_pos / k)` positives and fold sizes differ by
/// at most one.
pub fn stratified_kfold(data: &LabeledDataset, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::invalid(format!("fold count must be at least 2, got {k}")));
    }
    let mut pos: Vec<usize> = (0..data.instance_count()).filter(|&i| data.labels()[i] == 1).collect();
    let mut neg: Vec<usize> = (0..data.instance_count()).filter(|&i| data.labels()[i] == 0).collect();
    let smallest = pos.len().min(neg.len());
    if smallest < k {
        return Err(Error::TooFewInstances {
            needed: k,
            have: smallest,
        });
    }
    let mut rng = rng::stream(seed, "stratified-kfold", 0);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut assignments = vec![0; data.instance_count()];
    for (slot, &i) in pos.iter().chain(neg.iter()).enumerate() {
        assignments[i] = slot % k;
    }
    Ok(FoldPlan { k, assignments })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labeled(labels: Vec<u8>) -> LabeledDataset {
        let f = (0..labels.len()).map(|i| vec![i as f64]).collect();
        LabeledDataset::new(f, labels).unwrap()
    }

    #[test]
    fn five_and_five_into_five_folds() {
        let d = labeled(vec![1, 1, 1, 1, 1, 0, 0, 0, 0, 0]);
        for seed in 0..20 {
            let plan = stratified_kfold(&d, 5, seed).unwrap();
            // enumerate assignments and count per-fold labels
            let mut counts = [[0usize; 2]; 5];
            for (i, &f) in plan.assignments.iter().enumerate() {
                counts[f][d.labels()[i] as usize] += 1;
            }
            assert!(counts.iter().all(|c| *c == [1, 1]), "{counts:?}");
        }
    }

    #[test]
    fn seeded_determinism() {
        let d = labeled((0..40).map(|i| u8::from(i % 3 == 0)).collect());
        assert_eq!(stratified_kfold(&d, 4, 9).unwrap(), stratified_kfold(&d, 4, 9).unwrap());
        assert_ne!(
            stratified_kfold(&d, 4, 9).unwrap(),
            stratified_kfold(&d, 4, 10).unwrap()
        );
    }

    #[test]
    fn too_many_folds() {
        let d = labeled(vec![1, 1, 1, 1, 1, 0, 0, 0, 0, 0]);
        assert!(stratified_kfold(&d, 11, 0).is_err());
        assert!(stratified_kfold(&d, 6, 0).is_err());
        assert!(stratified_kfold(&d, 1, 0).is_err());
    }

    proptest! {
        #[test]
        fn stratification_invariants(n_pos in 2usize..40, n_neg in 2usize..80, k in 2usize..10, seed in any::<u64>()) {
            prop_assume!(n_pos.min(n_neg) >= k);
            let labels: Vec<u8> = (0..n_pos + n_neg).map(|i| u8::from(i < n_pos)).collect();
            let d = labeled(labels);
            let plan = stratified_kfold(&d, k, seed).unwrap();
            let mut sizes = vec![0usize; k];
            let mut pos = vec![0usize; k];
            for (i, &f) in plan.assignments.iter().enumerate() {
                prop_assert!(f < k);
                sizes[f] += 1;
                pos[f] += d.labels()[i] as usize;
            }
            let ceil = n_pos.div_ceil(k);
            prop_assert!(pos.iter().all(|&p| p.abs_diff(ceil) <= 1));
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
    }
}
