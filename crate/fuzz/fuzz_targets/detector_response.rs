#![no_main]

use libfuzzer_sys::fuzz_target;
use shipmatch_core::detect::parse_response;
use std::collections::BTreeSet;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let known: BTreeSet<String> = ["t0", "t1", "t2"].iter().map(|s| s.to_string()).collect();
    let _ = parse_response(text, &known);
});
