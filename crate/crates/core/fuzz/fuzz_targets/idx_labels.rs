#![no_main]

use libfuzzer_sys::fuzz_target;
use vbd_core::dataset::parse_idx_labels;

fuzz_target!(|data: &[u8]| {
    if let Ok(labels) = parse_idx_labels(data, 16) {
        assert!(labels.len() <= 16);
    }
    let _ = parse_idx_labels(data, usize::MAX);
});
