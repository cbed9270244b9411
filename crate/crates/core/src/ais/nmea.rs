use std::collections::VecDeque;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NmeaError {
    #[error("checksum mismatch: computed {computed:02X}, stated {stated:02X}")]
    Checksum { computed: u8, stated: u8 },
    #[error("malformed sentence: {0}")]
    Format(&'static str),
}

/// One framed `!AIVDM`/`!AIVDO` sentence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AivdmFrame {
    /// `true` for `!AIVDO` (own-ship) sentences.
    pub own_ship: bool,
    pub fragment_count: u8,
    pub fragment_index: u8,
    pub sequence_id: Option<u8>,
    pub channel: Option<char>,
    pub payload: String,
    pub fill_bits: u8,
    pub checksum: u8,
}

fn xor_checksum(body: &str) -> u8 {
    body.bytes().fold(0, |acc, b| acc ^ b)
}

fn small_int(field: &str, what: &'static str) -> Result<u8, NmeaError> {
    if field.len() != 1 {
        return Err(NmeaError::Format(what));
    }
    field
        .parse::<u8>()
        .map_err(|_| NmeaError::Format(what))
}

/// Parse and checksum-verify a single sentence.
pub fn parse_nmea_sentence(line: &str) -> Result<AivdmFrame, NmeaError> {
    let line = line.trim_end_matches(['\r', '\n', ' ']);
    let own_ship = if line.starts_with("!AIVDM,") {
        false
    } else if line.starts_with("!AIVDO,") {
        true
    } else {
        return Err(NmeaError::Format("expected !AIVDM or !AIVDO"));
    };
    let star = line
        .rfind('*')
        .ok_or(NmeaError::Format("missing checksum delimiter"))?;
    let body = &line[1..star];
    let stated = &line[star + 1..];
    // NMEA 0183 checksums are upper-case hex; accepting lower case as well
    // would let a single-character edit through undetected.
    if stated.len() != 2 || !stated.bytes().all(|b| matches!(b, b'0'..=b'9' | b'A'..=b'F')) {
        return Err(NmeaError::Format("checksum must be two upper-case hex digits"));
    }
    let stated = u8::from_str_radix(stated, 16).map_err(|_| NmeaError::Format("checksum"))?;
    let computed = xor_checksum(body);
    if computed != stated {
        return Err(NmeaError::Checksum { computed, stated });
    }

    let fields: Vec<&str> = body.split(',').collect();
    if fields.len() != 7 {
        return Err(NmeaError::Format("expected 7 comma-separated fields"));
    }
    let fragment_count = small_int(fields[1], "fragment count")?;
    let fragment_index = small_int(fields[2], "fragment index")?;
    if fragment_count == 0 || fragment_index == 0 || fragment_index > fragment_count {
        return Err(NmeaError::Format("fragment index outside 1..=count"));
    }
    let sequence_id = match fields[3] {
        "" => None,
        s => Some(small_int(s, "sequence id")?),
    };
    let channel = match fields[4] {
        "" => None,
        "A" => Some('A'),
        "B" => Some('B'),
        _ => return Err(NmeaError::Format("channel must be A or B")),
    };
    let fill_bits = small_int(fields[6], "fill bits")?;
    if fill_bits > 5 {
        return Err(NmeaError::Format("fill bits must be 0..=5"));
    }
    Ok(AivdmFrame {
        own_ship,
        fragment_count,
        fragment_index,
        sequence_id,
        channel,
        payload: fields[5].to_string(),
        fill_bits,
        checksum: stated,
    })
}

/// A complete (possibly reassembled) armored payload.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assembled {
    pub payload: String,
    pub fill_bits: u8,
    pub channel: Option<char>,
}

struct Partial {
    key: (Option<u8>, Option<char>),
    started_at: u64,
    expected_count: u8,
    next_index: u8,
    payload: String,
}

/// Multi-fragment reassembly keyed on (sequence id, channel).
///
/// A partial message older than [`Reassembler::WINDOW`] sentences is evicted
/// and counted as dropped, as is any fragment that arrives out of order.
pub struct Reassembler {
    pending: VecDeque<Partial>,
    seen: u64,
    dropped: u64,
}

impl Default for Reassembler {
    fn default() -> Self {
        Self::new()
    }
}

impl Reassembler {
    pub const WINDOW: u64 = 64;

    pub fn new() -> Self {
        Reassembler {
            pending: VecDeque::new(),
            seen: 0,
            dropped: 0,
        }
    }

    /// Number of fragments discarded so far.
    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    pub fn push(&mut self, frame: AivdmFrame) -> Option<Assembled> {
        self.seen += 1;
        while let Some(front) = self.pending.front() {
            if self.seen - front.started_at > Self::WINDOW {
                let p = self.pending.pop_front().expect("front exists");
                self.dropped += (p.next_index - 1) as u64;
            } else {
                break;
            }
        }

        if frame.fragment_count == 1 {
            return Some(Assembled {
                payload: frame.payload,
                fill_bits: frame.fill_bits,
                channel: frame.channel,
            });
        }

        let key = (frame.sequence_id, frame.channel);
        let existing = self.pending.iter().position(|p| p.key == key);

        if frame.fragment_index == 1 {
            if let Some(i) = existing {
                let stale = self.pending.remove(i).expect("index valid");
                self.dropped += (stale.next_index - 1) as u64;
            }
            self.pending.push_back(Partial {
                key,
                started_at: self.seen,
                expected_count: frame.fragment_count,
                next_index: 2,
                payload: frame.payload,
            });
            return None;
        }

        let Some(i) = existing else {
            self.dropped += 1;
            return None;
        };
        let p = &mut self.pending[i];
        if p.next_index != frame.fragment_index || p.expected_count != frame.fragment_count {
            let stale = self.pending.remove(i).expect("index valid");
            self.dropped += stale.next_index as u64;
            return None;
        }
        p.payload.push_str(&frame.payload);
        p.next_index += 1;
        if p.next_index > p.expected_count {
            let done = self.pending.remove(i).expect("index valid");
            return Some(Assembled {
                payload: done.payload,
                fill_bits: frame.fill_bits,
                channel: frame.channel,
            });
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GPSD_T1: &str = "!AIVDM,1,1,,B,177KQJ5000G?tO`K>RA1wUbN0TKH,0*5C";

    fn with_checksum(body: &str) -> String {
        format!("!{body}*{:02X}", xor_checksum(body))
    }

    #[test]
    fn parses_canonical_sentence() {
        let f = parse_nmea_sentence(GPSD_T1).unwrap();
        assert_eq!(f.payload, "177KQJ5000G?tO`K>RA1wUbN0TKH");
        assert_eq!(f.fill_bits, 0);
        assert_eq!(f.checksum, 0x5C);
        assert_eq!(f.channel, Some('B'));
        assert_eq!((f.fragment_count, f.fragment_index), (1, 1));
        assert!(!f.own_ship);
    }

    #[test]
    fn checksum_error_carries_both_values() {
        let bad = GPSD_T1.replace("*5C", "*5D");
        assert_eq!(
            parse_nmea_sentence(&bad),
            Err(NmeaError::Checksum {
                computed: 0x5C,
                stated: 0x5D
            })
        );
        assert!(matches!(
            parse_nmea_sentence(&GPSD_T1.replace("*5C", "*5c")),
            Err(NmeaError::Format(_))
        ));
    }

    #[test]
    fn multi_fragment_header() {
        let s = with_checksum("AIVDM,2,1,3,A,55?MbV02;H;s<HtKR20EHE:0@T4@Dn2222222216L961O5Gf0NSQEp6ClRp8,0");
        let f = parse_nmea_sentence(&s).unwrap();
        assert_eq!(f.fragment_count, 2);
        assert_eq!(f.fragment_index, 1);
        assert_eq!(f.sequence_id, Some(3));
        assert_eq!(f.channel, Some('A'));
    }

    #[test]
    fn format_errors() {
        assert!(matches!(
            parse_nmea_sentence(&with_checksum("AIVDM,1,1,,B,177KQJ")),
            Err(NmeaError::Format(_))
        ));
        assert!(matches!(
            parse_nmea_sentence(&with_checksum("AIVDM,1,1,,B,1,0,extra")),
            Err(NmeaError::Format(_))
        ));
        assert!(matches!(
            parse_nmea_sentence(&with_checksum("AIVDM,1,2,,B,1,0")),
            Err(NmeaError::Format(_))
        ));
        assert!(matches!(
            parse_nmea_sentence(&with_checksum("AIVDM,1,1,,C,1,0")),
            Err(NmeaError::Format(_))
        ));
        assert!(matches!(
            parse_nmea_sentence(&with_checksum("GPGGA,1,1,,B,1,0")),
            Err(NmeaError::Format(_))
        ));
        assert!(matches!(
            parse_nmea_sentence("!AIVDM,1,1,,B,1,0"),
            Err(NmeaError::Format(_))
        ));
        assert!(parse_nmea_sentence(&with_checksum("AIVDO,1,1,,,1,0")).unwrap().own_ship);
    }

    #[test]
    fn every_single_character_mutation_is_detected() {
        let bytes = GPSD_T1.as_bytes();
        for i in 0..bytes.len() {
            for repl in 32u8..127 {
                if repl == bytes[i] {
                    continue;
                }
                let mut m = bytes.to_vec();
                m[i] = repl;
                let s = String::from_utf8(m).unwrap();
                assert!(
                    parse_nmea_sentence(&s).is_err(),
                    "mutation at {i} to {:?} accepted",
                    repl as char
                );
            }
        }
    }

    #[test]
    fn reassembles_two_fragments() {
        let a = parse_nmea_sentence("!AIVDM,2,1,1,A,55?MbV02;H;s<HtKR20EHE:0@T4@Dn2222222216L961O5Gf0NSQEp6ClRp8,0*1C").unwrap();
        let b = parse_nmea_sentence("!AIVDM,2,2,1,A,88888888880,2*25").unwrap();
        let mut r = Reassembler::new();
        assert!(r.push(a).is_none());
        let done = r.push(b).unwrap();
        assert_eq!(done.fill_bits, 2);
        assert_eq!(done.payload.len(), 71);
        assert_eq!(r.dropped(), 0);
        assert_eq!(r.pending(), 0);
    }

    #[test]
    fn stray_and_stale_fragments_are_counted() {
        let mut r = Reassembler::new();
        let second = parse_nmea_sentence("!AIVDM,2,2,1,A,88888888880,2*25").unwrap();
        assert!(r.push(second).is_none());
        assert_eq!(r.dropped(), 1);

        let first = parse_nmea_sentence(&with_checksum("AIVDM,2,1,7,B,55?MbV02,0")).unwrap();
        assert!(r.push(first).is_none());
        let single = parse_nmea_sentence(GPSD_T1).unwrap();
        for _ in 0..=Reassembler::WINDOW {
            assert!(r.push(single.clone()).is_some());
        }
        assert_eq!(r.pending(), 0);
        assert_eq!(r.dropped(), 2);
    }
}
