//! Classification metrics and cross-validated comparison of balancing
//! methods.

mod experiment;
mod metrics;

pub use experiment::{
    run_cv_experiment, run_cv_experiment_traced, stability_probe, BalanceMethod, ExperimentResult, ExperimentSpec,
    FoldResult, MeanMetrics, MetricVariance, StabilityReport, Stage, TraceEvent, TraceHook,
};
pub use metrics::{confusion, precision_recall_f1, roc_auc, ConfusionMatrix, MetricsReport, Prf};
