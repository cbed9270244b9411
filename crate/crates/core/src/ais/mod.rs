//! AIS ingestion: Marine Cadastre CSV exports and raw NMEA `!AIVDM` sentences,
//! both normalized into [`AisRecord`]s.

mod armor;
mod cadastre;
mod message;
mod nmea;
mod record;

pub use armor::{decode_payload, ArmorError, Bits};
pub use cadastre::{parse_cadastre_csv, parse_utc, CadastreError, CadastreParse, Reject, REJECT_CAP};
pub use message::{
    decode_message, decode_position_report, decode_static_voyage, AisMessage, DecodeError,
    PositionReport, StaticVoyage,
};
pub use nmea::{parse_nmea_sentence, AivdmFrame, Assembled, NmeaError, Reassembler};
pub use record::{AisRecord, NavStatus, RecordError};

use std::collections::HashMap;
use std::io::BufRead;

/// Summary of a raw NMEA ingest pass.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct NmeaStats {
    pub lines: usize,
    pub sentences: usize,
    pub records: usize,
    pub bad_sentences: usize,
    pub unsupported: usize,
    pub untimed: usize,
    pub dropped_fragments: u64,
}

/// Split an optional receive timestamp off a log line.
///
/// Accepted forms are a leading epoch-seconds token (`1467397930 !AIVDM,...`)
/// and an NMEA 4.0 tag block carrying `c:<epoch>` (`\c:1467397930*55\!AIVDM,...`).
pub fn split_timestamp(line: &str) -> (Option<i64>, &str) {
    let line = line.trim();
    if let Some(rest) = line.strip_prefix('\\') {
        if let Some(end) = rest.find('\\') {
            let tag = &rest[..end];
            let tag = tag.split('*').next().unwrap_or("");
            let ts = tag
                .split(',')
                .find_map(|kv| kv.strip_prefix("c:"))
                .and_then(|v| v.parse::<i64>().ok());
            return (ts, rest[end + 1..].trim_start());
        }
        return (None, line);
    }
    if let Some((head, tail)) = line.split_once(char::is_whitespace) {
        if let Ok(t) = head.parse::<f64>() {
            if t.is_finite() {
                return (Some(t.floor() as i64), tail.trim_start());
            }
        }
    }
    (None, line)
}

/// Decode a stream of NMEA lines into records.
///
/// Static/voyage reports (type 5) are remembered per MMSI and merged into
/// later position reports. Lines without a timestamp use `fallback_time`
/// when provided and are otherwise counted as untimed and skipped.
pub fn ingest_nmea<R: BufRead>(
    reader: R,
    fallback_time: Option<i64>,
) -> std::io::Result<(Vec<AisRecord>, NmeaStats)> {
    let mut stats = NmeaStats::default();
    let mut reassembler = Reassembler::new();
    let mut statics: HashMap<u32, StaticVoyage> = HashMap::new();
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        stats.lines += 1;
        let (ts, sentence) = split_timestamp(&line);
        let frame = match parse_nmea_sentence(sentence) {
            Ok(f) => f,
            Err(e) => {
                log::debug!("line {}: {e}", stats.lines);
                stats.bad_sentences += 1;
                continue;
            }
        };
        stats.sentences += 1;
        let Some(assembled) = reassembler.push(frame) else {
            continue;
        };
        let bits = match decode_payload(&assembled.payload, assembled.fill_bits) {
            Ok(b) => b,
            Err(_) => {
                stats.bad_sentences += 1;
                continue;
            }
        };
        match decode_message(&bits) {
            Ok(AisMessage::Position(report)) => {
                let Some(t) = ts.or(fallback_time) else {
                    stats.untimed += 1;
                    continue;
                };
                if let Some(mut rec) = report.to_record(t) {
                    if let Some(sv) = statics.get(&rec.mmsi) {
                        sv.apply_to(&mut rec);
                    }
                    out.push(rec);
                    stats.records += 1;
                }
            }
            Ok(AisMessage::StaticVoyage(sv)) => {
                statics.insert(sv.mmsi, sv);
            }
            Err(DecodeError::Unsupported(_)) => stats.unsupported += 1,
            Err(_) => stats.bad_sentences += 1,
        }
    }
    stats.dropped_fragments = reassembler.dropped();
    Ok((out, stats))
}
