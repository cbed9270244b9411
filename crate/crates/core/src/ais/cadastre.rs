use super::record::{AisRecord, NavStatus};
use chrono::{DateTime, NaiveDateTime};
use std::io::Read;
use thiserror::Error;

/// Reject entries kept verbatim; beyond this only a count is kept.
pub const REJECT_CAP: usize = 10_000;

#[derive(Debug, Error)]
pub enum CadastreError {
    #[error("missing mandatory column {0}")]
    MissingColumn(&'static str),
    #[error("empty input: no header row")]
    NoHeader,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reject {
    /// 1-based line number in the input.
    pub line: u64,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CadastreParse {
    pub records: Vec<AisRecord>,
    pub rejects: Vec<Reject>,
    /// Rejects past [`REJECT_CAP`], counted only.
    pub rejects_overflow: usize,
}

impl CadastreParse {
    pub fn total_rejects(&self) -> usize {
        self.rejects.len() + self.rejects_overflow
    }
}

struct Columns {
    mmsi: usize,
    time: usize,
    lat: usize,
    lon: usize,
    sog: Option<usize>,
    cog: Option<usize>,
    heading: Option<usize>,
    name: Option<usize>,
    vessel_type: Option<usize>,
    status: Option<usize>,
    length: Option<usize>,
    width: Option<usize>,
}

impl Columns {
    fn from_header(header: &csv::ByteRecord) -> Result<Self, CadastreError> {
        let names: Vec<String> = header
            .iter()
            .map(|h| {
                String::from_utf8_lossy(h)
                    .trim_start_matches('\u{feff}')
                    .trim()
                    .to_ascii_lowercase()
            })
            .collect();
        let find = |n: &str| names.iter().position(|h| h == n);
        let need = |n: &'static str| find(&n.to_ascii_lowercase()).ok_or(CadastreError::MissingColumn(n));
        Ok(Columns {
            mmsi: need("MMSI")?,
            time: need("BaseDateTime")?,
            lat: need("LAT")?,
            lon: need("LON")?,
            sog: find("sog"),
            cog: find("cog"),
            heading: find("heading"),
            name: find("vesselname"),
            vessel_type: find("vesseltype"),
            status: find("status"),
            length: find("length"),
            width: find("width"),
        })
    }
}

/// Parse a UTC timestamp. Values without an offset are taken as UTC.
pub fn parse_utc(s: &str) -> Option<i64> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y/%m/%d %H:%M:%S%.f"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.and_utc().timestamp());
        }
    }
    None
}

fn field(rec: &csv::ByteRecord, idx: usize) -> Result<&str, String> {
    let raw = rec.get(idx).ok_or_else(|| "missing field".to_string())?;
    std::str::from_utf8(raw)
        .map(str::trim)
        .map_err(|_| "invalid utf-8".to_string())
}

fn opt_field(rec: &csv::ByteRecord, idx: Option<usize>) -> Result<Option<&str>, String> {
    match idx {
        None => Ok(None),
        Some(i) => match rec.get(i) {
            None => Ok(None),
            Some(_) => field(rec, i).map(|s| (!s.is_empty()).then_some(s)),
        },
    }
}

fn number(s: &str, what: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("bad {what}"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("bad {what}"))
    }
}

fn opt_number(s: Option<&str>, what: &str) -> Result<Option<f64>, String> {
    s.map(|s| number(s, what)).transpose()
}

fn integral(v: f64) -> Option<i64> {
    (v.fract() == 0.0 && v.abs() < 1e15).then_some(v as i64)
}

fn parse_row(rec: &csv::ByteRecord, cols: &Columns) -> Result<AisRecord, String> {
    let mmsi = field(rec, cols.mmsi)?;
    let mmsi: u64 = mmsi.parse().map_err(|_| "bad mmsi".to_string())?;
    if mmsi > 999_999_999 {
        return Err("mmsi out of range".into());
    }
    let timestamp = parse_utc(field(rec, cols.time)?).ok_or("bad timestamp")?;
    let lat = number(field(rec, cols.lat)?, "lat")?;
    if !(-90.0..=90.0).contains(&lat) {
        return Err("lat out of range".into());
    }
    let lon = number(field(rec, cols.lon)?, "lon")?;
    if !(-180.0..=180.0).contains(&lon) {
        return Err("lon out of range".into());
    }

    let nav_status = match opt_field(rec, cols.status)? {
        None => NavStatus::UNDEFINED,
        Some(s) => match s.parse::<f64>() {
            Ok(v) => integral(v)
                .and_then(|c| u8::try_from(c).ok())
                .and_then(NavStatus::from_code)
                .ok_or("status out of range")?,
            Err(_) => NavStatus::from_label(s),
        },
    };

    let mut out = AisRecord::new(mmsi as u32, timestamp, lat, lon, nav_status);
    out.sog = opt_number(opt_field(rec, cols.sog)?, "sog")?;
    out.cog = opt_number(opt_field(rec, cols.cog)?, "cog")?;
    out.heading = opt_number(opt_field(rec, cols.heading)?, "heading")?.filter(|&h| h != 511.0);
    out.length_m = opt_number(opt_field(rec, cols.length)?, "length")?;
    if out.length_m.is_some_and(|l| l < 0.0) {
        return Err("negative length".into());
    }
    out.width_m = opt_number(opt_field(rec, cols.width)?, "width")?;
    if out.width_m.is_some_and(|w| w < 0.0) {
        return Err("negative width".into());
    }
    out.vessel_type = match opt_number(opt_field(rec, cols.vessel_type)?, "vessel type")? {
        None => None,
        Some(v) => Some(
            integral(v)
                .and_then(|c| u16::try_from(c).ok())
                .ok_or("bad vessel type")?,
        ),
    };
    out.name = opt_field(rec, cols.name)?.map(str::to_string);
    Ok(out)
}

/// Parse a Marine Cadastre CSV export. Column order is taken from the header.
///
/// Malformed rows never abort the stream; they are collected as rejects.
/// Only a missing mandatory column (or an I/O failure) is fatal.
pub fn parse_cadastre_csv<R: Read>(input: R) -> Result<CadastreParse, CadastreError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut row = csv::ByteRecord::new();
    if !reader.read_byte_record(&mut row)? {
        return Err(CadastreError::NoHeader);
    }
    let cols = Columns::from_header(&row)?;

    let mut out = CadastreParse::default();
    loop {
        match reader.read_byte_record(&mut row) {
            Ok(false) => break,
            Ok(true) => {
                let line = row.position().map(|p| p.line()).unwrap_or(0);
                match parse_row(&row, &cols) {
                    Ok(rec) => out.records.push(rec),
                    Err(reason) => {
                        if out.rejects.len() < REJECT_CAP {
                            out.rejects.push(Reject { line, reason });
                        } else {
                            out.rejects_overflow += 1;
                        }
                    }
                }
            }
            Err(e) => match e.kind() {
                csv::ErrorKind::Io(_) => return Err(e.into()),
                _ => {
                    let line = e.position().map(|p| p.line()).unwrap_or(0);
                    if out.rejects.len() < REJECT_CAP {
                        out.rejects.push(Reject {
                            line,
                            reason: e.to_string(),
                        });
                    } else {
                        out.rejects_overflow += 1;
                    }
                }
            },
        }
    }
    Ok(out)
}
