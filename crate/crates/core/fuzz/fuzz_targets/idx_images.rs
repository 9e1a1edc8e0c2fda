#![no_main]

use libfuzzer_sys::fuzz_target;
use vbd_core::dataset::parse_idx_images;

fuzz_target!(|data: &[u8]| {
    let limit = data.first().map_or(1, |&b| usize::from(b) + 1);
    if let Ok(images) = parse_idx_images(data, limit) {
        assert!(images.pixels.len() <= limit.min(images.declared));
        for px in &images.pixels {
            assert_eq!(px.len(), images.rows * images.cols);
            assert!(px.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
    let _ = parse_idx_images(data, usize::MAX);
});
