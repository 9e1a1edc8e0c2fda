#![no_main]

use libfuzzer_sys::fuzz_target;
use vbd_core::dataset::parse_features_csv;

fuzz_target!(|data: &[u8]| {
    for has_header in [false, true] {
        if let Ok(rows) = parse_features_csv(data, has_header) {
            let d = rows.first().map_or(0, Vec::len);
            assert!(rows.iter().all(|r| r.len() == d));
        }
    }
});
