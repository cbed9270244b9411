use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// ITU-R M.1371 navigational status code (0..=15).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct NavStatus(u8);

const LABELS: [&str; 16] = [
    "under way using engine",
    "at anchor",
    "not under command",
    "restricted manoeuvrability",
    "constrained by her draught",
    "moored",
    "aground",
    "engaged in fishing",
    "under way sailing",
    "reserved for hsc",
    "reserved for wig",
    "power-driven vessel towing astern",
    "power-driven vessel pushing ahead or towing alongside",
    "reserved for future use",
    "ais-sart is active",
    "undefined",
];

// Spellings seen in Marine Cadastre exports across years, mapped onto codes.
// Matching is done after lowercasing and collapsing non-alphanumerics to a
// single space.
const ALIASES: [(&str, u8); 14] = [
    ("underway using engine", 0),
    ("under way by engine", 0),
    ("restricted maneuverability", 3),
    ("restricted manoeuverability", 3),
    ("constrained by draught", 4),
    ("constrained by her draft", 4),
    ("engaged in fishing", 7),
    ("underway sailing", 8),
    ("reserved for future amendment hsc", 9),
    ("reserved for future amendment wig", 10),
    ("ais sart is active", 14),
    ("not defined", 15),
    ("not defined default", 15),
    ("unknown", 15),
];

impl NavStatus {
    pub const UNDER_WAY_USING_ENGINE: NavStatus = NavStatus(0);
    pub const AT_ANCHOR: NavStatus = NavStatus(1);
    pub const MOORED: NavStatus = NavStatus(5);
    pub const UNDER_WAY_SAILING: NavStatus = NavStatus(8);
    pub const UNDEFINED: NavStatus = NavStatus(15);

    pub fn from_code(code: u8) -> Option<NavStatus> {
        (code <= 15).then_some(NavStatus(code))
    }

    pub fn code(self) -> u8 {
        self.0
    }

    /// Canonical ITU-R label.
    pub fn label(self) -> &'static str {
        LABELS[self.0 as usize]
    }

    /// Map a free-text status onto a code. Unknown text maps to 15 (undefined).
    pub fn from_label(text: &str) -> NavStatus {
        let norm = normalize(text);
        if norm.is_empty() {
            return NavStatus::UNDEFINED;
        }
        if let Some(i) = LABELS.iter().position(|l| normalize(l) == norm) {
            return NavStatus(i as u8);
        }
        ALIASES
            .iter()
            .find(|(a, _)| *a == norm)
            .map(|&(_, c)| NavStatus(c))
            .unwrap_or(NavStatus::UNDEFINED)
    }
}

fn normalize(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut pending_space = false;
    for c in s.chars() {
        if c.is_alphanumeric() {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.extend(c.to_lowercase());
        } else {
            pending_space = true;
        }
    }
    out
}

impl TryFrom<u8> for NavStatus {
    type Error = RecordError;
    fn try_from(v: u8) -> Result<Self, Self::Error> {
        NavStatus::from_code(v).ok_or(RecordError::NavStatus(v as i64))
    }
}

impl From<NavStatus> for u8 {
    fn from(s: NavStatus) -> u8 {
        s.0
    }
}

impl fmt::Display for NavStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.0, self.label())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecordError {
    #[error("lat out of range")]
    Lat,
    #[error("lon out of range")]
    Lon,
    #[error("mmsi out of range")]
    Mmsi,
    #[error("nav status {0} out of range")]
    NavStatus(i64),
    #[error("negative length")]
    Length,
    #[error("negative width")]
    Width,
}

/// One timestamped vessel report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AisRecord {
    pub mmsi: u32,
    /// UTC epoch seconds.
    pub timestamp: i64,
    pub lat: f64,
    pub lon: f64,
    pub sog: Option<f64>,
    pub cog: Option<f64>,
    /// `None` when the transmitter reported 511 (unavailable).
    pub heading: Option<f64>,
    pub nav_status: NavStatus,
    pub length_m: Option<f64>,
    pub width_m: Option<f64>,
    pub vessel_type: Option<u16>,
    pub name: Option<String>,
}

impl AisRecord {
    pub fn new(mmsi: u32, timestamp: i64, lat: f64, lon: f64, nav_status: NavStatus) -> Self {
        AisRecord {
            mmsi,
            timestamp,
            lat,
            lon,
            sog: None,
            cog: None,
            heading: None,
            nav_status,
            length_m: None,
            width_m: None,
            vessel_type: None,
            name: None,
        }
    }

    pub fn validate(&self) -> Result<(), RecordError> {
        if !(-90.0..=90.0).contains(&self.lat) {
            return Err(RecordError::Lat);
        }
        if !(-180.0..=180.0).contains(&self.lon) {
            return Err(RecordError::Lon);
        }
        if self.mmsi > 999_999_999 {
            return Err(RecordError::Mmsi);
        }
        if self.length_m.is_some_and(|l| !(l >= 0.0)) {
            return Err(RecordError::Length);
        }
        if self.width_m.is_some_and(|w| !(w >= 0.0)) {
            return Err(RecordError::Width);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_round_trip() {
        for code in 0..=15u8 {
            let s = NavStatus::from_code(code).unwrap();
            assert_eq!(NavStatus::from_label(s.label()), s, "{s}");
        }
    }

    #[test]
    fn documented_text_mapping() {
        assert_eq!(NavStatus::from_label("moored").code(), 5);
        assert_eq!(NavStatus::from_label("At Anchor").code(), 1);
        assert_eq!(NavStatus::from_label("under way using engine").code(), 0);
        assert_eq!(NavStatus::from_label("Underway Using Engine").code(), 0);
        assert_eq!(NavStatus::from_label("AIS-SART is active").code(), 14);
        assert_eq!(NavStatus::from_label("something else").code(), 15);
        assert_eq!(NavStatus::from_label("").code(), 15);
    }

    #[test]
    fn serde_rejects_out_of_range_status() {
        assert!(serde_json::from_str::<NavStatus>("16").is_err());
        assert_eq!(serde_json::from_str::<NavStatus>("5").unwrap(), NavStatus::MOORED);
    }

    #[test]
    fn validation() {
        let mut r = AisRecord::new(1, 0, 0.0, 0.0, NavStatus::MOORED);
        assert!(r.validate().is_ok());
        r.lat = 95.0;
        assert_eq!(r.validate(), Err(RecordError::Lat));
        r.lat = f64::NAN;
        assert_eq!(r.validate(), Err(RecordError::Lat));
        r.lat = 0.0;
        r.length_m = Some(-1.0);
        assert_eq!(r.validate(), Err(RecordError::Length));
    }
}
