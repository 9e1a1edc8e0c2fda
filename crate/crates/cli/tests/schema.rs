use std::collections::BTreeSet;
use std::path::Path;

use serde_json::Value;
use vbd_cli::config::{ANOMALY_FIELDS, EXPERIMENT_FIELDS};

fn schema(name: &str) -> Value {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs").join(name);
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn keys(v: &Value) -> BTreeSet<String> {
    v["properties"].as_object().unwrap().keys().cloned().collect()
}

#[test]
fn experiment_schema_lists_accepted_fields() {
    let want: BTreeSet<String> = EXPERIMENT_FIELDS.iter().map(|s| s.to_string()).collect();
    assert_eq!(keys(&schema("experiment-config.schema.json")), want);
}

#[test]
fn anomaly_schema_lists_accepted_fields() {
    let want: BTreeSet<String> = ANOMALY_FIELDS.iter().map(|s| s.to_string()).collect();
    assert_eq!(keys(&schema("anomaly-config.schema.json")), want);
}
