#![no_main]

use libfuzzer_sys::fuzz_target;
use shipmatch_core::airbus::{min_area_rect, RleMask};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(rle) = RleMask::parse_shape(text, 64, 64) else { return };
    let mask = rle.to_mask();
    assert_eq!(RleMask::from_mask(&mask).to_mask(), mask);
    let _ = min_area_rect(&mask);
});
