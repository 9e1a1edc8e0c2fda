//! Binary classifiers exposing a positive-class probability.
//!
//! Gaussian naive Bayes is fitted in closed form. Logistic regression, the
//! linear SVM and the MLP are fitted by mini-batch gradient descent with a
//! fixed learning rate: each epoch visits the rows in a seeded shuffled
//! order and, per batch, applies `θ ← θ - lr · (mean batch gradient + l2 · θ)`
//! (the L2 term skips biases). Momentum is available but off by default.

mod linear;
mod mlp;
mod naive_bayes;

pub use linear::{LinearLoss, LinearModel};
pub use mlp::Mlp;
pub use naive_bayes::GaussianNb;

use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    NaiveBayes,
    Logistic,
    LinearSvm,
    Mlp,
}

impl ClassifierKind {
    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::NaiveBayes => "naive_bayes",
            ClassifierKind::Logistic => "logistic",
            ClassifierKind::LinearSvm => "linear_svm",
            ClassifierKind::Mlp => "mlp",
        }
    }
}

impl std::str::FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive_bayes" => Ok(ClassifierKind::NaiveBayes),
            "logistic" => Ok(ClassifierKind::Logistic),
            "linear_svm" => Ok(ClassifierKind::LinearSvm),
            "mlp" => Ok(ClassifierKind::Mlp),
            other => Err(Error::InvalidConfig(format!("unknown classifier kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub kind: ClassifierKind,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub l2: f64,
    /// Hidden layer widths (MLP only).
    pub hidden: Vec<usize>,
    pub momentum: f64,
    pub seed: u64,
}

impl ClassifierSpec {
    pub fn new(kind: ClassifierKind) -> Self {
        ClassifierSpec {
            kind,
            learning_rate: 0.1,
            epochs: 50,
            batch_size: 32,
            l2: 1e-4,
            hidden: vec![16],
            momentum: 0.0,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.kind == ClassifierKind::NaiveBayes {
            return Ok(());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return bad("l2 must be non-negative");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if self.kind == ClassifierKind::Mlp && (self.hidden.is_empty() || self.hidden.contains(&0)) {
            return bad("mlp needs at least one hidden layer of positive width");
        }
        Ok(())
    }
}

/// A fitted classifier.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedClassifier {
    NaiveBayes(GaussianNb),
    Logistic(LinearModel),
    LinearSvm(LinearModel),
    Mlp(Mlp),
}

impl TrainedClassifier {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            TrainedClassifier::NaiveBayes(_) => ClassifierKind::NaiveBayes,
            TrainedClassifier::Logistic(_) => ClassifierKind::Logistic,
            TrainedClassifier::LinearSvm(_) => ClassifierKind::LinearSvm,
            TrainedClassifier::Mlp(_) => ClassifierKind::Mlp,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            TrainedClassifier::NaiveBayes(m) => m.input_dim(),
            TrainedClassifier::Logistic(m) | TrainedClassifier::LinearSvm(m) => m.weights.len(),
            TrainedClassifier::Mlp(m) => m.input_dim(),
        }
    }

    /// Probability of class 1. For the linear SVM this is the logistic
    /// squashing of the signed margin.
    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        Ok(match self {
            TrainedClassifier::NaiveBayes(m) => m.proba(x),
            TrainedClassifier::Logistic(m) | TrainedClassifier::LinearSvm(m) => m.proba(x),
            TrainedClassifier::Mlp(m) => m.proba(x),
        })
    }

    /// Label 1 when the class-1 probability reaches one half.
    pub fn predict(&self, x: &[f64]) -> Result<u8> {
        Ok(u8::from(self.predict_proba(x)? >= 0.5))
    }
}

fn check_training_data(rows: &[Vec<f64>], labels: &[u8]) -> Result<usize> {
    if rows.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} rows but {} labels",
            rows.len(),
            labels.len()
        )));
    }
    let positives = labels.iter().filter(|&&l| l == 1).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::SingleClass);
    }
    let d = rows[0].len();
    if let Some(r) = rows.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: r.len(),
        });
    }
    Ok(d)
}

/// Fit a classifier on raw rows and 0/1 labels.
pub fn fit_rows(spec: &ClassifierSpec, rows: &[Vec<f64>], labels: &[u8]) -> Result<TrainedClassifier> {
    spec.validate()?;
    check_training_data(rows, labels)?;
    Ok(match spec.kind {
        ClassifierKind::NaiveBayes => TrainedClassifier::NaiveBayes(GaussianNb::fit(rows, labels)),
        ClassifierKind::Logistic => {
            TrainedClassifier::Logistic(LinearModel::fit(spec, LinearLoss::Logistic, rows, labels)?)
        }
        ClassifierKind::LinearSvm => {
            TrainedClassifier::LinearSvm(LinearModel::fit(spec, LinearLoss::Hinge, rows, labels)?)
        }
        ClassifierKind::Mlp => TrainedClassifier::Mlp(Mlp::fit(spec, rows, labels)?),
    })
}

pub fn fit(spec: &ClassifierSpec, data: &LabeledDataset) -> Result<TrainedClassifier> {
    fit_rows(spec, data.features(), data.labels())
}

/// Linear SVM: hinge loss plus L2, minimized by subgradient descent.
pub fn fit_linear_svm(data: &LabeledDataset, config: &ClassifierSpec) -> Result<TrainedClassifier> {
    let spec = ClassifierSpec {
        kind: ClassifierKind::LinearSvm,
        ..config.clone()
    };
    fit(&spec, data)
}

/// Compare the analytic training-loss gradient of a randomly initialized
/// logistic or MLP model with central finite differences on `data`.
/// Returns the largest per-tensor relative error.
pub fn grad_check(spec: &ClassifierSpec, data: &LabeledDataset, epsilon: f64) -> Result<f64> {
    spec.validate()?;
    let rows = data.features();
    let labels = data.labels();
    if rows.is_empty() {
        return Err(Error::invalid("gradient check needs at least one row"));
    }
    match spec.kind {
        ClassifierKind::Logistic => Ok(linear::grad_check(spec, rows, labels, epsilon)),
        ClassifierKind::Mlp => Ok(mlp::grad_check(spec, rows, labels, epsilon)),
        other => Err(Error::InvalidConfig(format!(
            "gradient check is defined for logistic and mlp, not {}",
            other.name()
        ))),
    }
}

pub(crate) fn batches(n: usize, batch_size: usize, rng: &mut crate::rng::Rng) -> Vec<Vec<usize>> {
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pair() -> LabeledDataset {
        LabeledDataset::new(vec![vec![0.0], vec![1.0]], vec![0, 1]).unwrap()
    }

    #[test]
    fn single_class_is_rejected() {
        let d = LabeledDataset::new(vec![vec![0.0], vec![1.0]], vec![1, 1]).unwrap();
        for kind in [
            ClassifierKind::NaiveBayes,
            ClassifierKind::Logistic,
            ClassifierKind::LinearSvm,
            ClassifierKind::Mlp,
        ] {
            assert!(matches!(fit(&ClassifierSpec::new(kind), &d), Err(Error::SingleClass)));
        }
        assert!(fit_linear_svm(&d, &ClassifierSpec::new(ClassifierKind::LinearSvm)).is_err());
    }

    #[test]
    fn invalid_spec_is_rejected() {
        let mut s = ClassifierSpec::new(ClassifierKind::Logistic);
        s.epochs = 0;
        assert!(fit(&s, &pair()).is_err());
        let mut s = ClassifierSpec::new(ClassifierKind::Mlp);
        s.hidden = vec![];
        assert!(fit(&s, &pair()).is_err());
    }

    #[test]
    fn dimension_mismatch_on_predict() {
        let m = fit(&ClassifierSpec::new(ClassifierKind::Logistic), &pair()).unwrap();
        assert!(m.predict_proba(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn same_seed_same_parameters() {
        let d = LabeledDataset::new(
            (0..20).map(|i| vec![i as f64 / 20.0, (i % 3) as f64]).collect(),
            (0..20).map(|i| u8::from(i % 4 == 0)).collect(),
        )
        .unwrap();
        for kind in [
            ClassifierKind::NaiveBayes,
            ClassifierKind::Logistic,
            ClassifierKind::LinearSvm,
            ClassifierKind::Mlp,
        ] {
            let s = ClassifierSpec::new(kind).with_seed(5);
            assert_eq!(fit(&s, &d).unwrap(), fit(&s, &d).unwrap());
        }
    }

    #[test]
    fn grad_check_rejects_closed_form_models() {
        assert!(grad_check(&ClassifierSpec::new(ClassifierKind::NaiveBayes), &pair(), 1e-6).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn probabilities_are_bounded(
            rows in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 2), 4..16),
            probe in prop::collection::vec(-10.0f64..10.0, 2),
            kind_idx in 0usize..4,
            seed in any::<u64>(),
        ) {
            let labels: Vec<u8> = (0..rows.len()).map(|i| u8::from(i % 2 == 0)).collect();
            let d = LabeledDataset::new(rows, labels).unwrap();
            let kind = [ClassifierKind::NaiveBayes, ClassifierKind::Logistic, ClassifierKind::LinearSvm, ClassifierKind::Mlp][kind_idx];
            let mut s = ClassifierSpec::new(kind).with_seed(seed);
            s.epochs = 5;
            let m = fit(&s, &d).unwrap();
            let p = m.predict_proba(&probe).unwrap();
            prop_assert!((0.0..=1.0).contains(&p));
            if let TrainedClassifier::NaiveBayes(nb) = &m {
                let [p0, p1] = nb.posteriors(&probe);
                prop_assert!((p0 + p1 - 1.0).abs() < 1e-12);
                prop_assert_eq!(p1, p);
            }
        }
    }
}
