#![no_main]

use libfuzzer_sys::fuzz_target;
use shipmatch_core::raster::{read_geotiff_georef, Pixels};

fuzz_target!(|data: &[u8]| {
    let _ = read_geotiff_georef(std::io::Cursor::new(data));
    let _ = Pixels::decode(data);
});
