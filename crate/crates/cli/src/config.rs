//! JSON run configurations for the `experiment`, `stability` and `anomaly`
//! commands. Parsing checks every field and names the offending one in its
//! error; relative paths are resolved against the config file's directory.

use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use vbd_core::anomaly::AnomalyConfig;
use vbd_core::autoencoder::{AeArchitecture, TrainConfig};
use vbd_core::crossconcat::CrossConcatOptions;
use vbd_core::dataset::{load_csv, load_idx, CsvOptions, LabelColumn, LabeledDataset};
use vbd_core::eval::{BalanceMethod, ExperimentSpec};
use vbd_core::models::{ClassifierKind, ClassifierSpec};

use crate::error::{CliError, CliResult};

/// View over one JSON object that reports errors with a dotted field path.
struct Fields<'a> {
    prefix: String,
    map: &'a Map<String, Value>,
}

impl<'a> Fields<'a> {
    fn new(value: &'a Value, prefix: &str) -> CliResult<Self> {
        match value.as_object() {
            Some(map) => Ok(Fields {
                prefix: prefix.to_string(),
                map,
            }),
            None if prefix.is_empty() => Err(CliError::Validation("config must be a JSON object".into())),
            None => Err(CliError::field(prefix, "expected an object")),
        }
    }

    fn name(&self, key: &str) -> String {
        if self.prefix.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.prefix)
        }
    }

    fn err(&self, key: &str, msg: impl std::fmt::Display) -> CliError {
        CliError::field(&self.name(key), msg)
    }

    fn only(&self, allowed: &[&str]) -> CliResult<()> {
        match self.map.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(self.err(k, "unknown field")),
            None => Ok(()),
        }
    }

    fn get(&self, key: &str) -> Option<&'a Value> {
        self.map.get(key).filter(|v| !v.is_null())
    }

    fn require(&self, key: &str) -> CliResult<&'a Value> {
        self.get(key).ok_or_else(|| self.err(key, "missing"))
    }

    fn str(&self, key: &str) -> CliResult<Option<&'a str>> {
        self.get(key)
            .map(|v| v.as_str().ok_or_else(|| self.err(key, "expected a string")))
            .transpose()
    }

    fn u64(&self, key: &str) -> CliResult<Option<u64>> {
        self.get(key)
            .map(|v| {
                v.as_u64()
                    .ok_or_else(|| self.err(key, "expected a non-negative integer"))
            })
            .transpose()
    }

    fn usize(&self, key: &str) -> CliResult<Option<usize>> {
        Ok(self.u64(key)?.map(|v| v as usize))
    }

    fn f64(&self, key: &str) -> CliResult<Option<f64>> {
        self.get(key)
            .map(|v| v.as_f64().ok_or_else(|| self.err(key, "expected a number")))
            .transpose()
    }

    fn bool(&self, key: &str) -> CliResult<Option<bool>> {
        self.get(key)
            .map(|v| v.as_bool().ok_or_else(|| self.err(key, "expected true or false")))
            .transpose()
    }

    fn usize_list(&self, key: &str) -> CliResult<Option<Vec<usize>>> {
        let Some(v) = self.get(key) else { return Ok(None) };
        let items = v
            .as_array()
            .ok_or_else(|| self.err(key, "expected an array of integers"))?;
        items
            .iter()
            .map(|x| {
                x.as_u64()
                    .map(|n| n as usize)
                    .ok_or_else(|| self.err(key, "expected an array of integers"))
            })
            .collect::<CliResult<Vec<_>>>()
            .map(Some)
    }

    fn path(&self, key: &str, base: &Path) -> CliResult<PathBuf> {
        let raw = self.str(key)?.ok_or_else(|| self.err(key, "missing"))?;
        let p = base.join(raw);
        if !p.is_file() {
            return Err(self.err(key, format!("file not found: {}", p.display())));
        }
        Ok(p)
    }
}

fn path_str(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

/// Where an experiment's dataset comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Csv {
        path: PathBuf,
        label_column: String,
        positive_label: String,
        has_header: bool,
    },
    Idx {
        images: PathBuf,
        labels: PathBuf,
        positive_class: u8,
        limit: usize,
    },
}

impl DatasetSource {
    fn parse(value: &Value, prefix: &str, base: &Path) -> CliResult<Self> {
        let f = Fields::new(value, prefix)?;
        match f.str("format")?.unwrap_or("csv") {
            "csv" => {
                f.only(&["format", "path", "label_column", "positive_label", "has_header"])?;
                Ok(DatasetSource::Csv {
                    path: f.path("path", base)?,
                    label_column: f.str("label_column")?.unwrap_or("class").to_string(),
                    positive_label: f.str("positive_label")?.unwrap_or("positive").to_string(),
                    has_header: f.bool("has_header")?.unwrap_or(true),
                })
            }
            "idx" => {
                f.only(&["format", "images", "labels", "positive_class", "limit"])?;
                let positive_class = f
                    .u64("positive_class")?
                    .ok_or_else(|| f.err("positive_class", "missing"))?;
                let positive_class =
                    u8::try_from(positive_class).map_err(|_| f.err("positive_class", "must be at most 255"))?;
                let limit = f.usize("limit")?.unwrap_or(usize::MAX);
                if limit == 0 {
                    return Err(f.err("limit", "must be at least 1"));
                }
                Ok(DatasetSource::Idx {
                    images: f.path("images", base)?,
                    labels: f.path("labels", base)?,
                    positive_class,
                    limit,
                })
            }
            other => Err(f.err(
                "format",
                format!("unknown dataset format '{other}' (expected csv or idx)"),
            )),
        }
    }

    pub fn load(&self) -> CliResult<LabeledDataset> {
        Ok(match self {
            DatasetSource::Csv {
                path,
                label_column,
                positive_label,
                has_header,
            } => {
                let column = label_column.parse::<LabelColumn>().map_err(CliError::from)?;
                let mut opts = CsvOptions::new(column, positive_label.clone());
                if !has_header {
                    opts = opts.without_header();
                }
                load_csv(path, &opts)?
            }
            DatasetSource::Idx {
                images,
                labels,
                positive_class,
                limit,
            } => load_idx(images, labels, *limit, *positive_class)?,
        })
    }

    fn to_json(&self) -> Value {
        match self {
            DatasetSource::Csv {
                path,
                label_column,
                positive_label,
                has_header,
            } => json!({
                "format": "csv",
                "path": path_str(path),
                "label_column": label_column,
                "positive_label": positive_label,
                "has_header": has_header,
            }),
            DatasetSource::Idx {
                images,
                labels,
                positive_class,
                limit,
            } => json!({
                "format": "idx",
                "images": path_str(images),
                "labels": path_str(labels),
                "positive_class": positive_class,
                "limit": if *limit == usize::MAX { Value::Null } else { json!(limit) },
            }),
        }
    }
}

fn parse_classifier(value: &Value, prefix: &str) -> CliResult<(ClassifierSpec, Option<u64>)> {
    let kind_of = |s: &str, field: &str| {
        s.parse::<ClassifierKind>()
            .map_err(|_| CliError::field(field, format!("unknown classifier '{s}'")))
    };
    if let Some(s) = value.as_str() {
        return Ok((ClassifierSpec::new(kind_of(s, prefix)?), None));
    }
    let f = Fields::new(value, prefix)?;
    f.only(&[
        "kind",
        "learning_rate",
        "epochs",
        "batch_size",
        "l2",
        "hidden",
        "momentum",
        "seed",
    ])?;
    let kind = f.str("kind")?.ok_or_else(|| f.err("kind", "missing"))?;
    let mut spec = ClassifierSpec::new(kind_of(kind, &f.name("kind"))?);
    if let Some(v) = f.f64("learning_rate")? {
        spec.learning_rate = v;
    }
    if let Some(v) = f.usize("epochs")? {
        spec.epochs = v;
    }
    if let Some(v) = f.usize("batch_size")? {
        spec.batch_size = v;
    }
    if let Some(v) = f.f64("l2")? {
        spec.l2 = v;
    }
    if let Some(v) = f.usize_list("hidden")? {
        spec.hidden = v;
    }
    if let Some(v) = f.f64("momentum")? {
        spec.momentum = v;
    }
    spec.validate().map_err(|e| CliError::field(prefix, e))?;
    Ok((spec, f.u64("seed")?))
}

fn read_json(path: &Path) -> CliResult<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: invalid JSON: {e}", path.display())))
}

fn base_dir(config_path: &Path) -> PathBuf {
    config_path.parent().map(Path::to_path_buf).unwrap_or_default()
}

/// Settings shared by `experiment` and `stability`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub method: BalanceMethod,
    pub classifier: ClassifierSpec,
    /// Classifier seed; the top-level seed when absent.
    pub classifier_seed: Option<u64>,
    pub folds: usize,
    pub seed: u64,
    pub method_seed: Option<u64>,
    pub smote_k: usize,
    pub normalize: bool,
    pub max_pairs: Option<usize>,
    pub repeats: usize,
    pub output_dir: PathBuf,
}

pub const EXPERIMENT_FIELDS: &[&str] = &[
    "dataset",
    "method",
    "classifier",
    "folds",
    "seed",
    "method_seed",
    "smote_k",
    "normalize",
    "max_pairs",
    "repeats",
    "output_dir",
];

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        Self::from_value(&read_json(path)?, &base_dir(path))
    }

    pub fn from_value(value: &Value, base: &Path) -> CliResult<Self> {
        let f = Fields::new(value, "")?;
        f.only(EXPERIMENT_FIELDS)?;
        let dataset = DatasetSource::parse(f.require("dataset")?, "dataset", base)?;
        let method_name = f.str("method")?.ok_or_else(|| f.err("method", "missing"))?;
        let method = method_name
            .parse::<BalanceMethod>()
            .map_err(|_| f.err("method", format!("unknown method '{method_name}'")))?;
        let (classifier, classifier_seed) = parse_classifier(f.require("classifier")?, "classifier")?;
        let folds = f.usize("folds")?.unwrap_or(10);
        if folds < 2 {
            return Err(f.err("folds", "must be at least 2"));
        }
        let smote_k = f.usize("smote_k")?.unwrap_or(5);
        if smote_k == 0 {
            return Err(f.err("smote_k", "must be at least 1"));
        }
        let max_pairs = f.usize("max_pairs")?;
        if max_pairs == Some(0) {
            return Err(f.err("max_pairs", "must be at least 1"));
        }
        let repeats = f.usize("repeats")?.unwrap_or(10);
        if repeats < 2 {
            return Err(f.err("repeats", "must be at least 2"));
        }
        Ok(ExperimentConfig {
            dataset,
            method,
            classifier,
            classifier_seed,
            folds,
            seed: f.u64("seed")?.unwrap_or(0),
            method_seed: f.u64("method_seed")?,
            smote_k,
            normalize: f.bool("normalize")?.unwrap_or(true),
            max_pairs,
            repeats,
            output_dir: base.join(f.str("output_dir")?.unwrap_or("out")),
        })
    }

    pub fn spec(&self) -> ExperimentSpec {
        let mut spec = ExperimentSpec::new(
            self.method,
            self.classifier
                .clone()
                .with_seed(self.classifier_seed.unwrap_or(self.seed)),
        );
        spec.folds = self.folds;
        spec.seed = self.seed;
        spec.method_seed = self.method_seed;
        spec.smote_k = self.smote_k;
        spec.normalize = self.normalize;
        spec.cross_concat = CrossConcatOptions {
            max_pairs: self.max_pairs,
        };
        spec
    }

    /// Fully resolved settings, for output headers.
    pub fn to_json(&self) -> Value {
        let c = &self.classifier;
        json!({
            "dataset": self.dataset.to_json(),
            "method": self.method.name(),
            "classifier": {
                "kind": c.kind.name(),
                "learning_rate": c.learning_rate,
                "epochs": c.epochs,
                "batch_size": c.batch_size,
                "l2": c.l2,
                "hidden": c.hidden,
                "momentum": c.momentum,
                "seed": self.classifier_seed.unwrap_or(self.seed),
            },
            "folds": self.folds,
            "seed": self.seed,
            "method_seed": self.method_seed.unwrap_or(self.seed),
            "smote_k": self.smote_k,
            "normalize": self.normalize,
            "max_pairs": self.max_pairs,
            "repeats": self.repeats,
            "output_dir": path_str(&self.output_dir),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyRunConfig {
    pub train_path: PathBuf,
    pub test_path: PathBuf,
    pub label_column: String,
    pub normal_label: String,
    pub has_header: bool,
    /// VBD autoencoder layer plan; twice the default plan for the feature
    /// count when absent.
    pub architecture: Option<Vec<usize>>,
    pub u: usize,
    pub w: usize,
    /// Traditional-baseline threshold; chosen by best F1 when absent.
    pub tau: Option<f64>,
    pub epochs: usize,
    pub baseline_epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
}

pub const ANOMALY_FIELDS: &[&str] = &[
    "train",
    "test",
    "label_column",
    "normal_label",
    "has_header",
    "architecture",
    "u",
    "w",
    "tau",
    "epochs",
    "baseline_epochs",
    "learning_rate",
    "batch_size",
    "seed",
    "output_dir",
];

impl AnomalyRunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        Self::from_value(&read_json(path)?, &base_dir(path))
    }

    pub fn from_value(value: &Value, base: &Path) -> CliResult<Self> {
        let f = Fields::new(value, "")?;
        f.only(ANOMALY_FIELDS)?;
        let u = f.usize("u")?.ok_or_else(|| f.err("u", "missing"))?;
        let w = f.usize("w")?.ok_or_else(|| f.err("w", "missing"))?;
        let cfg = AnomalyRunConfig {
            train_path: f.path("train", base)?,
            test_path: f.path("test", base)?,
            label_column: f.str("label_column")?.unwrap_or("class").to_string(),
            normal_label: f
                .str("normal_label")?
                .ok_or_else(|| f.err("normal_label", "missing"))?
                .to_string(),
            has_header: f.bool("has_header")?.unwrap_or(true),
            architecture: f.usize_list("architecture")?,
            u,
            w,
            tau: f.f64("tau")?,
            epochs: f.usize("epochs")?.unwrap_or(3),
            baseline_epochs: f.usize("baseline_epochs")?.unwrap_or(100),
            learning_rate: f.f64("learning_rate")?.unwrap_or(TrainConfig::default().learning_rate),
            batch_size: f.usize("batch_size")?.unwrap_or(TrainConfig::default().batch_size),
            seed: f.u64("seed")?.unwrap_or(0),
            output_dir: base.join(f.str("output_dir")?.unwrap_or("out")),
        };
        cfg.check()?;
        Ok(cfg)
    }

    /// Range checks, also rerun after command-line overrides.
    pub fn check(&self) -> CliResult<()> {
        self.detector()
            .validate()
            .map_err(|_| CliError::field("w", format!("must lie in 1..=u (u = {}), got {}", self.u, self.w)))?;
        if self.u == 0 {
            return Err(CliError::field("u", "must be at least 1"));
        }
        if let Some(a) = &self.architecture {
            AeArchitecture::new(a.clone()).map_err(|e| CliError::field("architecture", e))?;
        }
        for (name, v) in [
            ("epochs", self.epochs),
            ("baseline_epochs", self.baseline_epochs),
            ("batch_size", self.batch_size),
        ] {
            if v == 0 {
                return Err(CliError::field(name, "must be at least 1"));
            }
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(CliError::field("learning_rate", "must be positive"));
        }
        if self.tau.is_some_and(|t| !t.is_finite() || t < 0.0) {
            return Err(CliError::field("tau", "must be a non-negative number"));
        }
        Ok(())
    }

    pub fn detector(&self) -> AnomalyConfig {
        AnomalyConfig {
            u: self.u,
            w: self.w,
            seed: self.seed,
        }
    }

    pub fn csv_options(&self) -> CliResult<CsvOptions> {
        let column = self.label_column.parse::<LabelColumn>().map_err(CliError::from)?;
        let opts = CsvOptions::new(column, self.normal_label.clone());
        Ok(if self.has_header { opts } else { opts.without_header() })
    }

    pub fn train_config(&self, epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            seed: self.seed,
            ..TrainConfig::default()
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "train": path_str(&self.train_path),
            "test": path_str(&self.test_path),
            "label_column": self.label_column,
            "normal_label": self.normal_label,
            "has_header": self.has_header,
            "architecture": self.architecture,
            "u": self.u,
            "w": self.w,
            "tau": self.tau,
            "epochs": self.epochs,
            "baseline_epochs": self.baseline_epochs,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "seed": self.seed,
            "output_dir": path_str(&self.output_dir),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("d.csv"), "a,b,class\n1,2,positive\n3,4,negative\n").unwrap();
        let p = dir.path().to_path_buf();
        (dir, p)
    }

    fn experiment(v: Value, base: &Path) -> CliResult<ExperimentConfig> {
        ExperimentConfig::from_value(&v, base)
    }

    #[test]
    fn minimal_experiment_gets_defaults() {
        let (_d, b) = base();
        let c = experiment(
            json!({"dataset": {"path": "d.csv"}, "method": "smote", "classifier": "logistic"}),
            &b,
        )
        .unwrap();
        assert_eq!(c.folds, 10);
        assert_eq!(c.method, BalanceMethod::Smote);
        assert_eq!(c.classifier.kind, ClassifierKind::Logistic);
        assert_eq!(c.output_dir, b.join("out"));
        assert_eq!(c.spec().classifier.seed, 0);
    }

    #[test]
    fn errors_name_the_field() {
        let (_d, b) = base();
        let cases = [
            (
                json!({"dataset": {"path": "d.csv"}, "method": "foo", "classifier": "logistic"}),
                "field `method`",
            ),
            (
                json!({"dataset": {"path": "d.csv"}, "method": "none", "classifier": "tree"}),
                "field `classifier`",
            ),
            (
                json!({"dataset": {"path": "d.csv"}, "method": "none", "classifier": {"kind": "mlp", "epochs": "x"}}),
                "field `classifier.epochs`",
            ),
            (
                json!({"dataset": {"path": "nope.csv"}, "method": "none", "classifier": "mlp"}),
                "field `dataset.path`",
            ),
            (
                json!({"dataset": {"path": "d.csv"}, "method": "none", "classifier": "mlp", "folds": 1}),
                "field `folds`",
            ),
            (
                json!({"dataset": {"path": "d.csv"}, "method": "none", "classifier": "mlp", "extra": 1}),
                "field `extra`",
            ),
            (json!({"method": "none", "classifier": "mlp"}), "field `dataset`"),
        ];
        for (v, needle) in cases {
            let e = experiment(v, &b).unwrap_err();
            assert_eq!(e.exit_code(), 2);
            assert!(e.to_string().contains(needle), "{e} lacks {needle}");
        }
    }

    #[test]
    fn anomaly_threshold_bounds() {
        let (_d, b) = base();
        let v = |w: u64| json!({"train": "d.csv", "test": "d.csv", "normal_label": "negative", "u": 20, "w": w});
        assert!(AnomalyRunConfig::from_value(&v(12), &b).is_ok());
        let e = AnomalyRunConfig::from_value(&v(21), &b).unwrap_err();
        assert!(e.to_string().contains("field `w`"));
        assert!(AnomalyRunConfig::from_value(&v(0), &b).is_err());
    }
}
