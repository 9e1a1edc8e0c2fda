use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{ConfusionMatrix, MetricsReport};
use crate::crossconcat::{cc_fit, cc_predict, CrossConcatOptions};
use crate::dataset::NormalizationStats;
use crate::dataset::{split_binary, stratified_kfold, LabeledDataset};
use crate::error::{Error, Result};
use crate::linalg::{mean_std, variance};
use crate::models::{fit, ClassifierSpec};
use crate::resample::{random_oversample, smote, SmoteConfig};
use crate::rng::derive_seed;

/// How the training fold is balanced before fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BalanceMethod {
    None,
    Smote,
    RandomOversample,
    CrossConcat,
}

impl BalanceMethod {
    pub const ALL: [BalanceMethod; 4] = [
        BalanceMethod::None,
        BalanceMethod::Smote,
        BalanceMethod::RandomOversample,
        BalanceMethod::CrossConcat,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BalanceMethod::None => "none",
            BalanceMethod::Smote => "smote",
            BalanceMethod::RandomOversample => "random_oversample",
            BalanceMethod::CrossConcat => "cross_concat",
        }
    }
}

impl fmt::Display for BalanceMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BalanceMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BalanceMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub method: BalanceMethod,
    pub classifier: ClassifierSpec,
    pub folds: usize,
    /// Seed of the fold assignment.
    pub seed: u64,
    /// Seed of the balancing method; the fold seed when absent.
    pub method_seed: Option<u64>,
    pub smote_k: usize,
    /// Min-max scale features, fitted on each training fold.
    pub normalize: bool,
    pub cross_concat: CrossConcatOptions,
}

impl ExperimentSpec {
    pub fn new(method: BalanceMethod, classifier: ClassifierSpec) -> Self {
        ExperimentSpec {
            method,
            classifier,
            folds: 10,
            seed: 0,
            method_seed: None,
            smote_k: 5,
            normalize: true,
            cross_concat: CrossConcatOptions::default(),
        }
    }

    pub fn resolved_method_seed(&self) -> u64 {
        self.method_seed.unwrap_or(self.seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::InvalidConfig(format!(
                "folds must be at least 2, got {}",
                self.folds
            )));
        }
        if self.smote_k == 0 {
            return Err(Error::InvalidConfig("smote_k must be at least 1".into()));
        }
        self.classifier.validate()
    }
}

/// Pipeline stage reported to a trace hook, with the dataset rows it read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    FitNormalization,
    Balance,
    Train,
    Predict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceEvent {
    pub fold: usize,
    pub stage: Stage,
    /// Indices into the experiment's input dataset.
    pub rows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    /// Rows the classifier was fitted on after balancing.
    pub train_rows: usize,
    pub test_rows: usize,
    pub metrics: MetricsReport,
    pub test_indices: Vec<usize>,
    pub predictions: Vec<u8>,
    /// Score for label 1; higher means more likely positive.
    pub scores: Vec<f64>,
}

/// One summary statistic per metric. AUC only covers the folds where it
/// is defined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: Option<f64>,
}

impl MeanMetrics {
    /// Mean and sample standard deviation across folds.
    fn of(folds: &[FoldResult]) -> (Self, Self) {
        let stat = |values: Vec<f64>| mean_std(&values);
        let col = |f: fn(&MetricsReport) -> f64| stat(folds.iter().map(|r| f(&r.metrics)).collect());
        let (p, r, f1) = (col(|m| m.precision), col(|m| m.recall), col(|m| m.f1));
        let aucs: Vec<f64> = folds.iter().filter_map(|r| r.metrics.auc).collect();
        let auc = (!aucs.is_empty()).then(|| stat(aucs));
        (
            MeanMetrics {
                precision: p.0,
                recall: r.0,
                f1: f1.0,
                auc: auc.map(|a| a.0),
            },
            MeanMetrics {
                precision: p.1,
                recall: r.1,
                f1: f1.1,
                auc: auc.map(|a| a.1),
            },
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub spec: ExperimentSpec,
    pub instances: usize,
    pub positives: usize,
    pub folds: Vec<FoldResult>,
    pub mean: MeanMetrics,
    pub std: MeanMetrics,
    /// Confusion counts summed over folds.
    pub pooled: ConfusionMatrix,
}

impl ExperimentResult {
    /// One row per fold: `fold,train_rows,test_rows,tp,fp,tn,fn,precision,recall,f1,auc,degenerate`.
    pub fn write_fold_csv<W: Write>(&self, mut out: W, preamble: &[String]) -> std::io::Result<()> {
        for line in preamble {
            writeln!(out, "# {line}")?;
        }
        writeln!(
            out,
            "fold,train_rows,test_rows,tp,fp,tn,fn,precision,recall,f1,auc,degenerate"
        )?;
        for f in &self.folds {
            let m = &f.metrics;
            let c = &m.confusion;
            let auc = m.auc.map_or(String::new(), |a| a.to_string());
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                f.fold,
                f.train_rows,
                f.test_rows,
                c.tp,
                c.fp,
                c.tn,
                c.fn_,
                m.precision,
                m.recall,
                m.f1,
                auc,
                m.degenerate
            )?;
        }
        out.flush()
    }
}

/// A sink for [`TraceEvent`]s; may be called from several threads.
pub type TraceHook<'a> = &'a (dyn Fn(TraceEvent) + Sync);

/// Stratified k-fold cross-validation of one balancing method with one
/// classifier. Normalization and balancing see only the training fold.
/// Folds run in parallel on the current rayon pool; results do not depend
/// on the number of threads.
pub fn run_cv_experiment(data: &LabeledDataset, spec: &ExperimentSpec) -> Result<ExperimentResult> {
    run_cv_experiment_traced(data, spec, &|_| {})
}

pub fn run_cv_experiment_traced(
    data: &LabeledDataset,
    spec: &ExperimentSpec,
    trace: TraceHook,
) -> Result<ExperimentResult> {
    spec.validate()?;
    let plan = stratified_kfold(data, spec.folds, spec.seed)?;
    let folds = (0..spec.folds)
        .into_par_iter()
        .map(|fold| {
            run_fold(
                data,
                spec,
                fold,
                &plan.train_indices(fold),
                &plan.test_indices(fold),
                trace,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let mut pooled = ConfusionMatrix::default();
    folds.iter().for_each(|f| pooled.add(&f.metrics.confusion));
    let (mean, std) = MeanMetrics::of(&folds);
    Ok(ExperimentResult {
        spec: spec.clone(),
        instances: data.instance_count(),
        positives: data.positive_count(),
        mean,
        std,
        pooled,
        folds,
    })
}

fn run_fold(
    data: &LabeledDataset,
    spec: &ExperimentSpec,
    fold: usize,
    train_idx: &[usize],
    test_idx: &[usize],
    trace: TraceHook,
) -> Result<FoldResult> {
    let emit = |stage, rows: &[usize]| {
        trace(TraceEvent {
            fold,
            stage,
            rows: rows.to_vec(),
        })
    };
    let mut train = data.subset(train_idx);
    let mut test = data.subset(test_idx);
    let mut stats = None;
    if spec.normalize {
        emit(Stage::FitNormalization, train_idx);
        let s = NormalizationStats::fit(train.features())?;
        train = s.apply(&train)?;
        test = s.apply(&test)?;
        stats = Some(s);
    }
    let method_seed = derive_seed(spec.resolved_method_seed(), "fold", fold as u64);
    let classifier = spec
        .classifier
        .clone()
        .with_seed(derive_seed(spec.classifier.seed, "fold", fold as u64));

    let (predictions, scores, train_rows) = if spec.method == BalanceMethod::CrossConcat {
        emit(Stage::Balance, train_idx);
        let split = split_binary(&train)?;
        emit(Stage::Train, train_idx);
        let mut model = cc_fit(&classifier, &split.minority, &split.majority, &spec.cross_concat)?;
        model.normalization = stats;
        emit(Stage::Predict, test_idx);
        let mut predictions = Vec::with_capacity(test.instance_count());
        let mut scores = Vec::with_capacity(test.instance_count());
        for t in test.features() {
            let p = cc_predict(&model, t)?;
            let minority = p.label == 1;
            let label = if minority {
                split.minority_label
            } else {
                1 - split.minority_label
            };
            let score = if split.minority_label == 1 {
                p.minority_score()
            } else {
                1.0 - p.minority_score()
            };
            predictions.push(label);
            scores.push(score);
        }
        (predictions, scores, model.training_rows)
    } else {
        let balanced = balance(&train, spec, method_seed, train_idx, &emit)?;
        emit(Stage::Train, train_idx);
        let model = fit(&classifier, &balanced)?;
        emit(Stage::Predict, test_idx);
        let scores = test
            .features()
            .iter()
            .map(|t| model.predict_proba(t))
            .collect::<Result<Vec<f64>>>()?;
        let predictions = scores.iter().map(|&p| u8::from(p >= 0.5)).collect();
        (predictions, scores, balanced.instance_count())
    };
    let metrics = MetricsReport::from_predictions(test.labels(), &predictions, Some(&scores))?;
    Ok(FoldResult {
        fold,
        train_rows,
        test_rows: test_idx.len(),
        metrics,
        test_indices: test_idx.to_vec(),
        predictions,
        scores,
    })
}

/// The training fold with synthetic or duplicated minority rows appended
/// until both classes are the same size.
fn balance(
    train: &LabeledDataset,
    spec: &ExperimentSpec,
    seed: u64,
    train_idx: &[usize],
    emit: &dyn Fn(Stage, &[usize]),
) -> Result<LabeledDataset> {
    if spec.method == BalanceMethod::None {
        return Ok(train.clone());
    }
    let split = split_binary(train)?;
    let source: Vec<usize> = train_idx
        .iter()
        .zip(train.labels())
        .filter(|(_, &l)| l == split.minority_label)
        .map(|(&i, _)| i)
        .collect();
    emit(Stage::Balance, &source);
    let needed = split.majority.len() - split.minority.len();
    let extra = match spec.method {
        BalanceMethod::Smote => smote(
            &split.minority,
            &SmoteConfig {
                k: spec.smote_k,
                n_synthetic: needed,
                seed,
            },
        )?,
        BalanceMethod::RandomOversample => random_oversample(&split.minority, needed, seed)?,
        BalanceMethod::None | BalanceMethod::CrossConcat => unreachable!("handled by caller"),
    };
    let (mut rows, mut labels) = train.clone().into_parts();
    labels.extend(std::iter::repeat_n(split.minority_label, extra.len()));
    rows.extend(extra);
    LabeledDataset::with_dim(rows, labels, train.feature_count())
}

/// Spread of the mean metrics when only the balancing method's seed
/// changes between repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub method: BalanceMethod,
    pub repeats: Vec<MeanMetrics>,
    pub variance: MetricVariance,
}

/// Sample variances (n - 1 denominator) across repeats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricVariance {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: Option<f64>,
}

/// Rerun the experiment `repeats` times with the fold assignment and the
/// classifier seed fixed and the method seed set to
/// `derive_seed(base, "method", r)` for repeat `r`.
pub fn stability_probe(data: &LabeledDataset, spec: &ExperimentSpec, repeats: usize) -> Result<StabilityReport> {
    if repeats < 2 {
        return Err(Error::InvalidConfig(format!(
            "repeats must be at least 2, got {repeats}"
        )));
    }
    let base = spec.resolved_method_seed();
    let runs = (0..repeats)
        .map(|r| {
            let s = ExperimentSpec {
                method_seed: Some(derive_seed(base, "method", r as u64)),
                ..spec.clone()
            };
            run_cv_experiment(data, &s).map(|res| res.mean)
        })
        .collect::<Result<Vec<_>>>()?;
    let col = |f: fn(&MeanMetrics) -> f64| variance(&runs.iter().map(f).collect::<Vec<_>>());
    let aucs: Option<Vec<f64>> = runs.iter().map(|m| m.auc).collect();
    Ok(StabilityReport {
        method: spec.method,
        variance: MetricVariance {
            precision: col(|m| m.precision),
            recall: col(|m| m.recall),
            f1: col(|m| m.f1),
            auc: aucs.map(|a| variance(&a)),
        },
        repeats: runs,
    })
}
