#![no_main]

use libfuzzer_sys::fuzz_target;
use shipmatch_core::ais::{decode_message, decode_payload, parse_nmea_sentence, Reassembler};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let mut re = Reassembler::new();
    for line in text.lines() {
        let Ok(frame) = parse_nmea_sentence(line) else { continue };
        if let Some(full) = re.push(frame) {
            if let Ok(bits) = decode_payload(&full.payload, full.fill_bits) {
                let _ = decode_message(&bits);
            }
        }
    }
});
