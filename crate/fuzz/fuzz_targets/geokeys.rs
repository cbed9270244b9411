#![no_main]

use libfuzzer_sys::fuzz_target;
use shipmatch_core::raster::parse_geokeys;

fuzz_target!(|data: &[u8]| {
    let dir: Vec<u16> = data.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect();
    let _ = parse_geokeys(&dir);
});
