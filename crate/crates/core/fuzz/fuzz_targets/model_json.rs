#![no_main]

use libfuzzer_sys::fuzz_target;
use vbd_core::model_io::StoredModel;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(model) = StoredModel::from_json(text) {
        let again = StoredModel::from_json(&model.to_json().unwrap()).unwrap();
        assert_eq!(again, model);
    }
});
