#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use vbd_cli::config::{AnomalyRunConfig, ExperimentConfig};

fuzz_target!(|data: &[u8]| {
    let Ok(value) = serde_json::from_slice::<serde_json::Value>(data) else {
        return;
    };
    // config errors must surface as validation failures, never panics
    let base = Path::new(".");
    if let Err(e) = ExperimentConfig::from_value(&value, base) {
        assert_eq!(e.exit_code(), 2);
    }
    if let Err(e) = AnomalyRunConfig::from_value(&value, base) {
        assert_eq!(e.exit_code(), 2);
    }
});
