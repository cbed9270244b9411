use super::armor::Bits;
use super::record::{AisRecord, NavStatus};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("payload too short: need {needed} bits, have {available}")]
    Length { needed: usize, available: usize },
    #[error("unsupported message type {0}")]
    Unsupported(u8),
}

const POSITION_BITS: usize = 168;
// Destination ends at bit 421; the DTE flag and spare bit are often omitted.
const STATIC_BITS: usize = 422;

const LON_UNAVAILABLE: i64 = 181 * 600_000;
const LAT_UNAVAILABLE: i64 = 91 * 600_000;
const SOG_UNAVAILABLE: u64 = 1023;
const COG_UNAVAILABLE: u64 = 3600;
const HEADING_UNAVAILABLE: u64 = 511;

/// Class A position report (message types 1, 2 and 3).
#[derive(Clone, Debug, PartialEq)]
pub struct PositionReport {
    pub msg_type: u8,
    pub repeat: u8,
    pub mmsi: u32,
    pub nav_status: NavStatus,
    pub rate_of_turn: Option<i8>,
    pub sog: Option<f64>,
    pub position_accuracy: bool,
    pub lon: Option<f64>,
    pub lat: Option<f64>,
    pub cog: Option<f64>,
    pub heading: Option<f64>,
    pub utc_second: u8,
}

impl PositionReport {
    /// Convert into a record stamped with `timestamp`. `None` when the report
    /// carries no usable position.
    pub fn to_record(&self, timestamp: i64) -> Option<AisRecord> {
        let (lat, lon) = (self.lat?, self.lon?);
        let mut r = AisRecord::new(self.mmsi, timestamp, lat, lon, self.nav_status);
        r.sog = self.sog;
        r.cog = self.cog;
        r.heading = self.heading;
        r.validate().ok()?;
        Some(r)
    }
}

/// Static and voyage related data (message type 5).
#[derive(Clone, Debug, PartialEq)]
pub struct StaticVoyage {
    pub mmsi: u32,
    pub imo: u32,
    pub callsign: String,
    pub name: String,
    pub ship_type: u8,
    pub to_bow: u16,
    pub to_stern: u16,
    pub to_port: u8,
    pub to_starboard: u8,
    pub draught_m: f64,
    pub destination: String,
}

impl StaticVoyage {
    /// Length overall (A + B); `None` when both are reported as zero.
    pub fn length_m(&self) -> Option<f64> {
        let l = self.to_bow as u32 + self.to_stern as u32;
        (l > 0).then_some(l as f64)
    }

    /// Beam (C + D); `None` when both are reported as zero.
    pub fn width_m(&self) -> Option<f64> {
        let w = self.to_port as u32 + self.to_starboard as u32;
        (w > 0).then_some(w as f64)
    }

    /// Fill the static fields of a position-derived record.
    pub fn apply_to(&self, rec: &mut AisRecord) {
        if rec.mmsi != self.mmsi {
            return;
        }
        rec.length_m = self.length_m().or(rec.length_m);
        rec.width_m = self.width_m().or(rec.width_m);
        if self.ship_type != 0 {
            rec.vessel_type = Some(self.ship_type as u16);
        }
        if !self.name.is_empty() {
            rec.name = Some(self.name.clone());
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum AisMessage {
    Position(PositionReport),
    StaticVoyage(StaticVoyage),
}

fn require(bits: &Bits, needed: usize) -> Result<(), DecodeError> {
    if bits.len() < needed {
        return Err(DecodeError::Length {
            needed,
            available: bits.len(),
        });
    }
    Ok(())
}

fn message_type(bits: &Bits) -> Result<u8, DecodeError> {
    bits.uint(0, 6)
        .map(|t| t as u8)
        .ok_or(DecodeError::Length {
            needed: 6,
            available: bits.len(),
        })
}

/// Dispatch on the message-type field.
pub fn decode_message(bits: &Bits) -> Result<AisMessage, DecodeError> {
    match message_type(bits)? {
        1..=3 => decode_position_report(bits).map(AisMessage::Position),
        5 => decode_static_voyage(bits).map(AisMessage::StaticVoyage),
        t => Err(DecodeError::Unsupported(t)),
    }
}

pub fn decode_position_report(bits: &Bits) -> Result<PositionReport, DecodeError> {
    let msg_type = message_type(bits)?;
    if !(1..=3).contains(&msg_type) {
        return Err(DecodeError::Unsupported(msg_type));
    }
    require(bits, POSITION_BITS)?;
    // Length was checked above, so every field read below is in range.
    let u = |s, w| bits.uint(s, w).expect("length checked");
    let i = |s, w| bits.int(s, w).expect("length checked");

    let status = NavStatus::from_code(u(38, 4) as u8).expect("4-bit field");
    let rot = i(42, 8);
    let sog = u(50, 10);
    let lon = i(61, 28);
    let lat = i(89, 27);
    let cog = u(116, 12);
    let heading = u(128, 9);

    let lon = (lon != LON_UNAVAILABLE)
        .then(|| lon as f64 / 600_000.0)
        .filter(|v| (-180.0..=180.0).contains(v));
    let lat = (lat != LAT_UNAVAILABLE)
        .then(|| lat as f64 / 600_000.0)
        .filter(|v| (-90.0..=90.0).contains(v));

    Ok(PositionReport {
        msg_type,
        repeat: u(6, 2) as u8,
        mmsi: u(8, 30) as u32,
        nav_status: status,
        rate_of_turn: (rot != -128).then_some(rot as i8),
        sog: (sog != SOG_UNAVAILABLE).then_some(sog as f64 / 10.0),
        position_accuracy: u(60, 1) == 1,
        lon,
        lat,
        cog: (cog < COG_UNAVAILABLE).then_some(cog as f64 / 10.0),
        heading: (heading < 360 && heading != HEADING_UNAVAILABLE).then_some(heading as f64),
        utc_second: u(137, 6) as u8,
    })
}

pub fn decode_static_voyage(bits: &Bits) -> Result<StaticVoyage, DecodeError> {
    let msg_type = message_type(bits)?;
    if msg_type != 5 {
        return Err(DecodeError::Unsupported(msg_type));
    }
    require(bits, STATIC_BITS)?;
    let u = |s, w| bits.uint(s, w).expect("length checked");
    let t = |s, n| bits.text(s, n).expect("length checked");
    Ok(StaticVoyage {
        mmsi: u(8, 30) as u32,
        imo: u(40, 30) as u32,
        callsign: t(70, 7),
        name: t(112, 20),
        ship_type: u(232, 8) as u8,
        to_bow: u(240, 9) as u16,
        to_stern: u(249, 9) as u16,
        to_port: u(258, 6) as u8,
        to_starboard: u(264, 6) as u8,
        draught_m: u(294, 8) as f64 / 10.0,
        destination: t(302, 20),
    })
}
