#![no_main]

use libfuzzer_sys::fuzz_target;
use vbd_core::dataset::{parse_csv, write_csv, CsvOptions, LabelColumn};

fuzz_target!(|data: &[u8]| {
    let Some((&selector, body)) = data.split_first() else {
        return;
    };
    let column = LabelColumn::Index(usize::from(selector % 8));
    let options = if selector & 0x80 == 0 {
        CsvOptions::new(column, "1").without_header()
    } else {
        CsvOptions::new(LabelColumn::Name("class".into()), "1")
    };
    let Ok(parsed) = parse_csv(body, &options) else {
        return;
    };
    let d = parsed.feature_count();
    assert!(parsed.features().iter().all(|r| r.len() == d));
    assert!(parsed.labels().iter().all(|&l| l <= 1));
    assert!(parsed.features().iter().flatten().all(|v| v.is_finite()));

    // whatever we accept, we can write and read back unchanged
    if d > 0 {
        let mut out = Vec::new();
        write_csv(&mut out, &parsed, &[]).unwrap();
        let back = parse_csv(out.as_slice(), &CsvOptions::new(LabelColumn::Name("label".into()), "1")).unwrap();
        assert_eq!(back, parsed);
    }
});
