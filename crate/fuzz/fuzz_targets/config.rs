#![no_main]

use libfuzzer_sys::fuzz_target;
use shipmatch_core::catalog::Config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(c) = Config::from_toml(text) {
        let _ = c.validate();
    }
});
