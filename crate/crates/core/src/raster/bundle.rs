use super::geotiff::read_geotiff_georef;
use super::pixels::{BinaryMask, Pixels};
use super::RasterError;
use crate::ais::parse_utc;
use crate::geo::{Crs, GeoRef};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Cursor;
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provider {
    Planet,
    Sentinel2,
    Synthetic,
}

impl Provider {
    /// Nominal ground sample distance, `None` when any GSD is accepted.
    pub fn nominal_gsd_m(self) -> Option<f64> {
        match self {
            Provider::Planet => Some(3.0),
            Provider::Sentinel2 => Some(10.0),
            Provider::Synthetic => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Provider::Planet => "planet",
            Provider::Sentinel2 => "sentinel2",
            Provider::Synthetic => "synthetic",
        }
    }
}

impl std::fmt::Display for Provider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Provider {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "planet" => Ok(Provider::Planet),
            "sentinel2" | "sentinel" | "sentinel-2" => Ok(Provider::Sentinel2),
            "synthetic" => Ok(Provider::Synthetic),
            other => Err(format!("unknown provider {other:?}")),
        }
    }
}

/// Georeference sidecar stored next to every image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub epsg: u32,
    pub transform: [f64; 6],
    pub width: u32,
    pub height: u32,
    /// ISO-8601 capture time; UTC when no offset is given.
    pub timestamp: String,
    pub provider: Provider,
    pub gsd_m: f64,
    /// Band identifiers of the stored composite, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bands: Option<Vec<String>>,
}

impl Sidecar {
    pub fn parse(text: &str) -> Result<Sidecar, RasterError> {
        serde_json::from_str(text).map_err(|e| RasterError::Sidecar(e.to_string()))
    }

    pub fn georef(&self) -> GeoRef {
        GeoRef {
            epsg: self.epsg,
            transform: self.transform,
        }
    }

    pub fn timestamp_epoch(&self) -> Result<i64, RasterError> {
        parse_utc(&self.timestamp)
            .ok_or_else(|| RasterError::Sidecar(format!("bad timestamp {:?}", self.timestamp)))
    }

    pub fn format_timestamp(epoch: i64) -> String {
        DateTime::<Utc>::from_timestamp(epoch, 0)
            .map(|d| d.format("%Y-%m-%dT%H:%M:%SZ").to_string())
            .unwrap_or_default()
    }

    /// Checks the georeference and the provider/GSD consistency rules.
    pub fn validate(&self) -> Result<(), RasterError> {
        let crs = self.georef().validate()?;
        self.timestamp_epoch()?;
        if !(self.gsd_m > 0.0 && self.gsd_m.is_finite()) {
            return Err(RasterError::Gsd(format!("gsd_m {} must be positive", self.gsd_m)));
        }
        if let Some(nominal) = self.provider.nominal_gsd_m() {
            if (self.gsd_m - nominal).abs() > 0.01 * nominal {
                return Err(RasterError::Gsd(format!(
                    "{} imagery is {nominal} m/px, sidecar says {}",
                    self.provider, self.gsd_m
                )));
            }
        }
        if let Crs::Utm { .. } = crs {
            let [a, _, _, d, _, _] = self.transform;
            let px = a.hypot(d);
            if (px - self.gsd_m).abs() > 0.01 * self.gsd_m {
                return Err(RasterError::Gsd(format!(
                    "transform pixel size {px} disagrees with gsd_m {}",
                    self.gsd_m
                )));
            }
        }
        Ok(())
    }
}

/// Pixel grid plus georeference, capture time and optional cloud mask.
/// Immutable once constructed.
#[derive(Clone, Debug)]
pub struct RasterBundle {
    id: String,
    pixels: Pixels,
    sidecar: Sidecar,
    timestamp: i64,
    cloud_mask: Option<BinaryMask>,
}

impl RasterBundle {
    pub fn new(
        id: impl Into<String>,
        pixels: Pixels,
        sidecar: Sidecar,
        cloud_mask: Option<BinaryMask>,
    ) -> Result<Self, RasterError> {
        sidecar.validate()?;
        if (pixels.width(), pixels.height()) != (sidecar.width, sidecar.height) {
            return Err(RasterError::GeoMismatch(format!(
                "image is {}x{}, sidecar declares {}x{}",
                pixels.width(),
                pixels.height(),
                sidecar.width,
                sidecar.height
            )));
        }
        if let Some(m) = &cloud_mask {
            if (m.width(), m.height()) != (pixels.width(), pixels.height()) {
                return Err(RasterError::GeoMismatch(format!(
                    "mask is {}x{}, image is {}x{}",
                    m.width(),
                    m.height(),
                    pixels.width(),
                    pixels.height()
                )));
            }
        }
        let timestamp = sidecar.timestamp_epoch()?;
        Ok(RasterBundle {
            id: id.into(),
            pixels,
            sidecar,
            timestamp,
            cloud_mask,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }
    pub fn pixels(&self) -> &Pixels {
        &self.pixels
    }
    pub fn width(&self) -> u32 {
        self.pixels.width()
    }
    pub fn height(&self) -> u32 {
        self.pixels.height()
    }
    pub fn georef(&self) -> GeoRef {
        self.sidecar.georef()
    }
    pub fn sidecar(&self) -> &Sidecar {
        &self.sidecar
    }
    pub fn timestamp(&self) -> i64 {
        self.timestamp
    }
    pub fn provider(&self) -> Provider {
        self.sidecar.provider
    }
    pub fn gsd_m(&self) -> f64 {
        self.sidecar.gsd_m
    }
    pub fn cloud_mask(&self) -> Option<&BinaryMask> {
        self.cloud_mask.as_ref()
    }
}

fn is_tiff(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("tif") || e.eq_ignore_ascii_case("tiff"))
}

fn same_georef(a: &GeoRef, b: &GeoRef) -> bool {
    a.epsg == b.epsg
        && a.transform
            .iter()
            .zip(b.transform.iter())
            .all(|(x, y)| (x - y).abs() <= 1e-6 * x.abs().max(y.abs()).max(1.0))
}

/// Load an image (PNG or TIFF), its JSON sidecar and an optional 1-band mask.
pub fn load_bundle(
    image_path: &Path,
    sidecar_path: &Path,
    mask_path: Option<&Path>,
) -> Result<RasterBundle, RasterError> {
    let sidecar_text = fs::read_to_string(sidecar_path)
        .map_err(|e| RasterError::MissingGeoRef(format!("{}: {e}", sidecar_path.display())))?;
    let sidecar = Sidecar::parse(&sidecar_text)?;

    let bytes = fs::read(image_path)
        .map_err(|e| RasterError::Decode(format!("{}: {e}", image_path.display())))?;
    if is_tiff(image_path) {
        if let Ok(Some(embedded)) = read_geotiff_georef(Cursor::new(&bytes)) {
            if !same_georef(&embedded, &sidecar.georef()) {
                return Err(RasterError::GeoMismatch(format!(
                    "GeoTIFF tags {embedded:?} disagree with sidecar"
                )));
            }
        }
    }
    let pixels = Pixels::decode(&bytes).map_err(RasterError::Decode)?;

    let mask = match mask_path {
        None => None,
        Some(p) => {
            let b = fs::read(p).map_err(|e| RasterError::Decode(format!("{}: {e}", p.display())))?;
            let m = Pixels::decode(&b).map_err(RasterError::Decode)?;
            Some(BinaryMask::from_pixels(&m))
        }
    };
    let id = image_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("image")
        .to_string();
    RasterBundle::new(id, pixels, sidecar, mask)
}
