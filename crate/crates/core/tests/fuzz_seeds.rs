//! Replays the checked-in fuzz corpus through the same entry points the fuzz
//! targets drive, so seeds stay well-formed and never panic on stable.

use shipmatch_core::airbus::{read_kaggle_index, RleMask};
use shipmatch_core::ais::{decode_message, decode_payload, parse_cadastre_csv, parse_nmea_sentence, AisMessage, Reassembler};
use shipmatch_core::catalog::{parse_log, Config};
use shipmatch_core::detect::parse_response;
use shipmatch_core::raster::{parse_geokeys, read_geotiff_georef, Sidecar};
use std::collections::BTreeSet;
use std::fs;
use std::path::PathBuf;

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn text(bytes: &[u8]) -> &str {
    std::str::from_utf8(bytes).unwrap()
}

#[test]
fn nmea_seeds_decode() {
    for (name, data) in seeds("nmea_sentence") {
        if name.starts_with("reject_") {
            assert!(text(&data).lines().all(|l| parse_nmea_sentence(l).is_err()), "{name}");
            continue;
        }
        let mut re = Reassembler::new();
        let mut decoded = 0;
        for line in text(&data).lines() {
            let frame = parse_nmea_sentence(line).unwrap_or_else(|e| panic!("{name}: {e}"));
            if let Some(full) = re.push(frame) {
                let bits = decode_payload(&full.payload, full.fill_bits).unwrap();
                decode_message(&bits).unwrap();
                decoded += 1;
            }
        }
        assert_eq!(decoded, 1, "{name}");
    }
}

#[test]
fn payload_seeds_decode() {
    for (name, data) in seeds("ais_payload") {
        let bits = decode_payload(text(&data[1..]), data[0]).unwrap_or_else(|e| panic!("{name}: {e}"));
        if name != "fill2" {
            let msg = decode_message(&bits).unwrap();
            assert!(matches!(msg, AisMessage::Position(_) | AisMessage::StaticVoyage(_)), "{name}");
        }
    }
}

#[test]
fn cadastre_seeds_are_total() {
    for (name, data) in seeds("cadastre_csv") {
        let p = parse_cadastre_csv(data.as_slice()).unwrap_or_else(|e| panic!("{name}: {e}"));
        let rows = text(&data).lines().count() - 1;
        assert_eq!(p.records.len() + p.total_rejects(), rows, "{name}");
    }
}

#[test]
fn rle_and_index_seeds_parse() {
    for (name, data) in seeds("rle") {
        RleMask::parse_shape(text(&data), 64, 64).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    for (name, data) in seeds("kaggle_index") {
        assert!(!read_kaggle_index(data.as_slice()).unwrap().is_empty(), "{name}");
    }
}

#[test]
fn document_seeds_parse() {
    for (name, data) in seeds("sidecar") {
        Sidecar::parse(text(&data)).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    let known: BTreeSet<String> = ["t0", "t1", "t2"].iter().map(|s| s.to_string()).collect();
    for (name, data) in seeds("detector_response") {
        parse_response(text(&data), &known).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    for (name, data) in seeds("curation_log") {
        assert_eq!(parse_log(&data).unwrap_or_else(|e| panic!("{name}: {e}")).len(), 2);
    }
    for (name, data) in seeds("config") {
        Config::from_toml(text(&data)).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn geotiff_seeds_parse() {
    for (name, data) in seeds("geokeys") {
        let dir: Vec<u16> = data.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect();
        assert_eq!(parse_geokeys(&dir).unwrap_or_else(|e| panic!("{name}: {e}")).projected_cs_type, Some(32610));
    }
    for (name, data) in seeds("geotiff") {
        let g = read_geotiff_georef(std::io::Cursor::new(data)).unwrap_or_else(|e| panic!("{name}: {e}")).unwrap();
        assert_eq!(g.epsg, 32611);
        assert_eq!(g.transform, [10.0, 0.0, 399960.0, 0.0, -10.0, 4200000.0]);
    }
}
