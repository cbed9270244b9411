#![no_main]

use libfuzzer_sys::fuzz_target;
use shipmatch_core::airbus::{prepare_index, read_kaggle_index, LengthMode};

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = read_kaggle_index(data) {
        let _ = prepare_index(&rows, LengthMode::Major, 1.5, 50.0);
    }
});
