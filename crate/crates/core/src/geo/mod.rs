//! Geodesy and georeferencing: WGS84 <-> UTM and geographic <-> pixel.
//!
//! Pixel convention: the geotransform addresses pixel *edges*, so `(col, row)
//! = (0, 0)` is the top-left corner of the top-left pixel and that pixel's
//! centre sits at `(0.5, 0.5)`.

mod utm;

pub use utm::{
    central_meridian, project, utm_epsg, utm_to_wgs84, wgs84_to_utm, zone_for, Hemisphere,
    UtmCoord, FALSE_EASTING, FALSE_NORTHING_SOUTH, MAX_ABS_LAT, UTM_K0, WGS84_A, WGS84_F,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const EPSG_WGS84: u32 = 4326;
/// Mean Earth radius used for great-circle distances.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("point ({lat}, {lon}) outside the projection domain")]
    OutOfDomain { lat: f64, lon: f64 },
    #[error("UTM zone {0} outside 1..=60")]
    InvalidZone(u8),
    #[error("geotransform is singular")]
    SingularTransform,
    #[error("unsupported CRS EPSG:{0}")]
    UnsupportedCrs(u32),
}

/// Coordinate reference systems the pipeline understands.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Crs {
    Geographic,
    Utm { zone: u8, hemisphere: Hemisphere },
}

impl Crs {
    pub fn from_epsg(epsg: u32) -> Result<Crs, GeoError> {
        match epsg {
            EPSG_WGS84 => Ok(Crs::Geographic),
            32601..=32660 => Ok(Crs::Utm {
                zone: (epsg - 32600) as u8,
                hemisphere: Hemisphere::N,
            }),
            32701..=32760 => Ok(Crs::Utm {
                zone: (epsg - 32700) as u8,
                hemisphere: Hemisphere::S,
            }),
            other => Err(GeoError::UnsupportedCrs(other)),
        }
    }

    pub fn is_projected(&self) -> bool {
        matches!(self, Crs::Utm { .. })
    }
}

/// CRS code plus a six-coefficient affine map from pixel to CRS coordinates:
/// `x = a*col + b*row + c`, `y = d*col + e*row + f`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeoRef {
    pub epsg: u32,
    pub transform: [f64; 6],
}

impl GeoRef {
    /// Validates the CRS code and invertibility.
    pub fn new(epsg: u32, transform: [f64; 6]) -> Result<Self, GeoError> {
        let g = GeoRef { epsg, transform };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<Crs, GeoError> {
        let crs = Crs::from_epsg(self.epsg)?;
        let det = self.determinant();
        if !det.is_finite() || det == 0.0 || self.transform.iter().any(|v| !v.is_finite()) {
            return Err(GeoError::SingularTransform);
        }
        Ok(crs)
    }

    pub fn crs(&self) -> Result<Crs, GeoError> {
        Crs::from_epsg(self.epsg)
    }

    pub fn determinant(&self) -> f64 {
        let [a, b, _, d, e, _] = self.transform;
        a * e - b * d
    }

    /// Pixel (fractional) to CRS coordinates.
    pub fn pixel_to_crs(&self, col: f64, row: f64) -> (f64, f64) {
        let [a, b, c, d, e, f] = self.transform;
        (a * col + b * row + c, d * col + e * row + f)
    }

    /// CRS coordinates to fractional pixel position.
    pub fn crs_to_pixel(&self, x: f64, y: f64) -> Result<(f64, f64), GeoError> {
        let [a, b, c, d, e, f] = self.transform;
        let det = self.determinant();
        if det == 0.0 || !det.is_finite() {
            return Err(GeoError::SingularTransform);
        }
        let (dx, dy) = (x - c, y - f);
        Ok(((e * dx - b * dy) / det, (a * dy - d * dx) / det))
    }
}

/// Geographic position to fractional `(col, row)`. For UTM rasters the point
/// is first projected into the raster's own zone and hemisphere.
pub fn geo_to_pixel(georef: &GeoRef, lat: f64, lon: f64) -> Result<(f64, f64), GeoError> {
    match georef.validate()? {
        Crs::Geographic => georef.crs_to_pixel(lon, lat),
        Crs::Utm { zone, hemisphere } => {
            let u = project(lat, lon, zone, hemisphere)?;
            georef.crs_to_pixel(u.easting, u.northing)
        }
    }
}

/// Fractional `(col, row)` to geographic `(lat, lon)`.
pub fn pixel_to_geo(georef: &GeoRef, col: f64, row: f64) -> Result<(f64, f64), GeoError> {
    let crs = georef.validate()?;
    let (x, y) = georef.pixel_to_crs(col, row);
    match crs {
        Crs::Geographic => Ok((y, x)),
        Crs::Utm { zone, hemisphere } => utm_to_wgs84(&UtmCoord {
            easting: x,
            northing: y,
            zone,
            hemisphere,
        }),
    }
}

/// Great-circle distance in metres between `(lat, lon)` pairs.
pub fn haversine_m(p1: (f64, f64), p2: (f64, f64)) -> f64 {
    let (lat1, lon1) = (p1.0.to_radians(), p1.1.to_radians());
    let (lat2, lon2) = (p2.0.to_radians(), p2.1.to_radians());
    let h = ((lat2 - lat1) / 2.0).sin().powi(2)
        + lat1.cos() * lat2.cos() * ((lon2 - lon1) / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}
