#![no_main]

use libfuzzer_sys::fuzz_target;
use shipmatch_core::ais::parse_cadastre_csv;

fuzz_target!(|data: &[u8]| {
    if let Ok(parsed) = parse_cadastre_csv(data) {
        for r in &parsed.records {
            assert!(r.validate().is_ok());
        }
    }
});
