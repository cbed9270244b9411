#![no_main]

use libfuzzer_sys::fuzz_target;
use shipmatch_core::ais::{decode_message, decode_payload};

fuzz_target!(|data: &[u8]| {
    let Some((&fill, rest)) = data.split_first() else { return };
    let Ok(payload) = std::str::from_utf8(rest) else { return };
    if let Ok(bits) = decode_payload(payload, fill % 8) {
        let _ = decode_message(&bits);
    }
});
