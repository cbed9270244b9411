#![no_main]

use libfuzzer_sys::fuzz_target;
use shipmatch_core::catalog::parse_log;

fuzz_target!(|data: &[u8]| {
    let _ = parse_log(data);
});
