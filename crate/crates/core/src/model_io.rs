//! JSON persistence for fitted classifiers and autoencoders.
//!
//! Every document has the same shape:
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "kind": "logistic",
//!   "input_dim": 3,
//!   "layer_sizes": null,
//!   "tensors": [
//!     {"name": "weights", "shape": [3], "values": [0.1, -0.2, 0.3]},
//!     {"name": "bias", "shape": [1], "values": [0.05]}
//!   ]
//! }
//! ```
//!
//! Tensors by kind:
//!
//! * `naive_bayes`: `priors [2]`, `mean_0 [d]`, `mean_1 [d]`, `var_0 [d]`, `var_1 [d]`
//! * `logistic`, `linear_svm`: `weights [d]`, `bias [1]`
//! * `mlp`, `autoencoder`: `layer{l}.weights [out, in]` (row-major) and
//!   `layer{l}.bias [out]` for each layer `l`; `layer_sizes` lists the widths
//!   from input to output. Hidden layers use ReLU and the last layer a
//!   sigmoid.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autoencoder::{AeArchitecture, AeModel};
use crate::error::{Error, Result};
use crate::models::{GaussianNb, LinearLoss, LinearModel, Mlp, TrainedClassifier};
use crate::nn::{Activation, Dense, DenseNet};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub format_version: u32,
    pub kind: String,
    pub input_dim: usize,
    #[serde(default)]
    pub layer_sizes: Option<Vec<usize>>,
    pub tensors: Vec<Tensor>,
    /// Free-form provenance (tool version, training settings); ignored on
    /// load.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<serde_json::Value>,
}

/// Anything this module can store.
#[derive(Debug, Clone, PartialEq)]
pub enum StoredModel {
    Classifier(TrainedClassifier),
    Autoencoder(AeModel),
}

fn tensor(name: impl Into<String>, shape: Vec<usize>, values: &[f64]) -> Tensor {
    Tensor {
        name: name.into(),
        shape,
        values: values.to_vec(),
    }
}

fn net_tensors(net: &DenseNet) -> Vec<Tensor> {
    net.layers
        .iter()
        .enumerate()
        .flat_map(|(l, layer)| {
            [
                tensor(
                    format!("layer{l}.weights"),
                    vec![layer.outputs, layer.inputs],
                    &layer.weights,
                ),
                tensor(format!("layer{l}.bias"), vec![layer.outputs], &layer.bias),
            ]
        })
        .collect()
}

impl StoredModel {
    pub fn to_document(&self) -> ModelDocument {
        let (kind, input_dim, layer_sizes, tensors) = match self {
            StoredModel::Classifier(TrainedClassifier::NaiveBayes(m)) => {
                let d = m.means[0].len();
                let tensors = vec![
                    tensor("priors", vec![2], &m.priors),
                    tensor("mean_0", vec![d], &m.means[0]),
                    tensor("mean_1", vec![d], &m.means[1]),
                    tensor("var_0", vec![d], &m.variances[0]),
                    tensor("var_1", vec![d], &m.variances[1]),
                ];
                ("naive_bayes", d, None, tensors)
            }
            StoredModel::Classifier(TrainedClassifier::Logistic(m) | TrainedClassifier::LinearSvm(m)) => {
                let kind = match m.loss {
                    LinearLoss::Logistic => "logistic",
                    LinearLoss::Hinge => "linear_svm",
                };
                let tensors = vec![
                    tensor("weights", vec![m.weights.len()], &m.weights),
                    tensor("bias", vec![1], &[m.bias]),
                ];
                (kind, m.weights.len(), None, tensors)
            }
            StoredModel::Classifier(TrainedClassifier::Mlp(m)) => {
                ("mlp", m.input_dim(), Some(m.net.sizes()), net_tensors(&m.net))
            }
            StoredModel::Autoencoder(m) => (
                "autoencoder",
                m.input_dim(),
                Some(m.architecture.layer_sizes().to_vec()),
                net_tensors(&m.net),
            ),
        };
        ModelDocument {
            format_version: FORMAT_VERSION,
            kind: kind.to_string(),
            input_dim,
            layer_sizes,
            tensors,
            metadata: None,
        }
    }

    /// Pretty-printed JSON. Fails on non-finite parameters, which JSON
    /// cannot carry.
    pub fn to_json(&self) -> Result<String> {
        self.to_json_with(None)
    }

    /// [`StoredModel::to_json`] with a `metadata` object attached.
    pub fn to_json_with(&self, metadata: Option<serde_json::Value>) -> Result<String> {
        let mut doc = self.to_document();
        doc.metadata = metadata;
        if doc.tensors.iter().flat_map(|t| &t.values).any(|v| !v.is_finite()) {
            return Err(Error::Format("model has non-finite parameters".into()));
        }
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        Self::from_document(doc)
    }

    pub fn from_document(doc: ModelDocument) -> Result<Self> {
        if doc.format_version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported format_version {}",
                doc.format_version
            )));
        }
        let mut tensors = Tensors(doc.tensors);
        let d = doc.input_dim;
        if d == 0 {
            return Err(Error::Format("input_dim must be positive".into()));
        }
        let model = match doc.kind.as_str() {
            "naive_bayes" => {
                let priors = tensors.take("priors", &[2])?;
                let means = [tensors.take("mean_0", &[d])?, tensors.take("mean_1", &[d])?];
                let variances = [tensors.take("var_0", &[d])?, tensors.take("var_1", &[d])?];
                if variances.iter().flatten().any(|v| *v <= 0.0) {
                    return Err(Error::Format("naive Bayes variances must be positive".into()));
                }
                if priors.iter().any(|p| !(0.0..=1.0).contains(p)) {
                    return Err(Error::Format("naive Bayes priors must lie in [0, 1]".into()));
                }
                StoredModel::Classifier(TrainedClassifier::NaiveBayes(GaussianNb {
                    priors: [priors[0], priors[1]],
                    means,
                    variances,
                }))
            }
            "logistic" | "linear_svm" => {
                let loss = if doc.kind == "logistic" {
                    LinearLoss::Logistic
                } else {
                    LinearLoss::Hinge
                };
                let m = LinearModel {
                    weights: tensors.take("weights", &[d])?,
                    bias: tensors.take("bias", &[1])?[0],
                    loss,
                };
                StoredModel::Classifier(match loss {
                    LinearLoss::Logistic => TrainedClassifier::Logistic(m),
                    LinearLoss::Hinge => TrainedClassifier::LinearSvm(m),
                })
            }
            "mlp" | "autoencoder" => {
                let sizes = doc
                    .layer_sizes
                    .ok_or_else(|| Error::Format(format!("{} needs layer_sizes", doc.kind)))?;
                if sizes.len() < 2 || sizes[0] != d || sizes.contains(&0) {
                    return Err(Error::Format(format!("layer_sizes {sizes:?} do not fit input_dim {d}")));
                }
                let n = sizes.len() - 1;
                let mut layers = Vec::with_capacity(n);
                for l in 0..n {
                    let (i, o) = (sizes[l], sizes[l + 1]);
                    let weights = tensors.take(&format!("layer{l}.weights"), &[o, i])?;
                    let bias = tensors.take(&format!("layer{l}.bias"), &[o])?;
                    let activation = if l + 1 == n {
                        Activation::Sigmoid
                    } else {
                        Activation::Relu
                    };
                    layers.push(Dense {
                        inputs: i,
                        outputs: o,
                        weights,
                        bias,
                        activation,
                    });
                }
                let net = DenseNet { layers };
                if doc.kind == "mlp" {
                    if sizes[n] != 1 {
                        return Err(Error::Format("mlp must end in a single output unit".into()));
                    }
                    StoredModel::Classifier(TrainedClassifier::Mlp(Mlp { net }))
                } else {
                    let arch = AeArchitecture::new(sizes).map_err(|e| Error::Format(e.to_string()))?;
                    StoredModel::Autoencoder(AeModel::from_parts(arch, net)?)
                }
            }
            other => return Err(Error::Format(format!("unknown model kind '{other}'"))),
        };
        if let Some(extra) = tensors.0.first() {
            return Err(Error::Format(format!("unexpected tensor '{}'", extra.name)));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

struct Tensors(Vec<Tensor>);

impl Tensors {
    fn take(&mut self, name: &str, shape: &[usize]) -> Result<Vec<f64>> {
        let pos = self
            .0
            .iter()
            .position(|t| t.name == name)
            .ok_or_else(|| Error::Format(format!("missing tensor '{name}'")))?;
        let t = self.0.remove(pos);
        if t.shape != shape {
            return Err(Error::Format(format!(
                "tensor '{name}' has shape {:?}, expected {shape:?}",
                t.shape
            )));
        }
        if t.values.len() != shape.iter().product::<usize>() {
            return Err(Error::Format(format!(
                "tensor '{name}' holds {} values for shape {shape:?}",
                t.values.len()
            )));
        }
        if t.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format(format!("tensor '{name}' has non-finite values")));
        }
        Ok(t.values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::LabeledDataset;
    use crate::models::{fit, ClassifierKind, ClassifierSpec};

    fn data() -> LabeledDataset {
        let rows = vec![
            vec![0.1, 0.2],
            vec![0.2, 0.1],
            vec![0.15, 0.3],
            vec![0.9, 0.8],
            vec![0.8, 0.95],
            vec![0.7, 0.9],
        ];
        LabeledDataset::new(rows, vec![0, 0, 0, 1, 1, 1]).unwrap()
    }

    #[test]
    fn classifiers_round_trip_exactly() {
        let d = data();
        for kind in [
            ClassifierKind::NaiveBayes,
            ClassifierKind::Logistic,
            ClassifierKind::LinearSvm,
            ClassifierKind::Mlp,
        ] {
            let m = fit(&ClassifierSpec::new(kind).with_seed(2), &d).unwrap();
            let stored = StoredModel::Classifier(m.clone());
            let back = StoredModel::from_json(&stored.to_json().unwrap()).unwrap();
            assert_eq!(back, stored, "{kind:?}");
            let StoredModel::Classifier(b) = back else { panic!() };
            for x in d.features() {
                assert_eq!(b.predict_proba(x).unwrap(), m.predict_proba(x).unwrap());
            }
        }
    }

    #[test]
    fn autoencoder_round_trips() {
        let arch = AeArchitecture::preset("wbc", true).unwrap();
        let m = StoredModel::Autoencoder(AeModel::new(arch, 4));
        let json = m.to_json().unwrap();
        assert_eq!(StoredModel::from_json(&json).unwrap(), m);
        let doc: ModelDocument = serde_json::from_str(&json).unwrap();
        assert_eq!(doc.kind, "autoencoder");
        assert!(doc.metadata.is_none() && !json.contains("metadata"));
        let tagged = m.to_json_with(Some(serde_json::json!({"tool": "vbd"}))).unwrap();
        assert_eq!(StoredModel::from_json(&tagged).unwrap(), m);
        assert_eq!(doc.tensors.len(), 12);
        assert_eq!(doc.tensors[0].shape, vec![12, 18]);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let m = StoredModel::Classifier(fit(&ClassifierSpec::new(ClassifierKind::Logistic), &data()).unwrap());
        m.save(&path).unwrap();
        assert_eq!(StoredModel::load(&path).unwrap(), m);
        assert!(matches!(
            StoredModel::load(dir.path().join("none.json")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn malformed_documents_are_rejected() {
        let good = r#"{"format_version":1,"kind":"logistic","input_dim":2,
            "tensors":[{"name":"weights","shape":[2],"values":[1,2]},{"name":"bias","shape":[1],"values":[0]}]}"#;
        assert!(StoredModel::from_json(good).is_ok());
        let cases = [
            good.replace("\"format_version\":1", "\"format_version\":2"),
            good.replace("logistic", "forest"),
            good.replace("[1,2]", "[1]"),
            good.replace("\"shape\":[2]", "\"shape\":[3]"),
            good.replace("\"bias\"", "\"offset\""),
            good.replace("\"input_dim\":2", "\"input_dim\":0"),
            good.replace("]}", "]},{\"name\":\"extra\",\"shape\":[1],\"values\":[1]}"),
            "{}".to_string(),
            "not json".to_string(),
        ];
        for c in cases {
            assert!(StoredModel::from_json(&c).is_err(), "{c}");
        }
        let ae = r#"{"format_version":1,"kind":"autoencoder","input_dim":2,"layer_sizes":[2,3,2],"tensors":[]}"#;
        assert!(StoredModel::from_json(ae).is_err());
    }
}
