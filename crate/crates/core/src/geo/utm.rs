//! Transverse Mercator on the WGS84 ellipsoid using Krüger's series carried
//! to sixth order in the third flattening (Karney 2011 coefficients).

use super::GeoError;
use serde::{Deserialize, Serialize};

pub const WGS84_A: f64 = 6_378_137.0;
pub const WGS84_F: f64 = 1.0 / 298.257_223_563;
pub const UTM_K0: f64 = 0.9996;
pub const FALSE_EASTING: f64 = 500_000.0;
pub const FALSE_NORTHING_SOUTH: f64 = 10_000_000.0;
pub const MAX_ABS_LAT: f64 = 84.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hemisphere {
    N,
    S,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtmCoord {
    pub easting: f64,
    pub northing: f64,
    pub zone: u8,
    pub hemisphere: Hemisphere,
}

impl UtmCoord {
    pub fn epsg(&self) -> u32 {
        utm_epsg(self.zone, self.hemisphere)
    }
}

pub fn utm_epsg(zone: u8, hemisphere: Hemisphere) -> u32 {
    match hemisphere {
        Hemisphere::N => 32600 + zone as u32,
        Hemisphere::S => 32700 + zone as u32,
    }
}

/// Longitude of a zone's central meridian, degrees.
pub fn central_meridian(zone: u8) -> f64 {
    zone as f64 * 6.0 - 183.0
}

/// Default zone for a longitude: `floor((lon + 180) / 6) + 1`, clamped to 1..=60.
pub fn zone_for(lon: f64) -> u8 {
    (((lon + 180.0) / 6.0).floor() as i64 + 1).clamp(1, 60) as u8
}

struct Series {
    e: f64,
    /// k0 times the rectifying radius.
    k0_a: f64,
    alpha: [f64; 6],
    beta: [f64; 6],
}

fn series() -> &'static Series {
    use std::sync::OnceLock;
    static S: OnceLock<Series> = OnceLock::new();
    S.get_or_init(|| {
        let f = WGS84_F;
        let n = f / (2.0 - f);
        let (n2, n3) = (n * n, n * n * n);
        let (n4, n5, n6) = (n3 * n, n3 * n2, n3 * n3);
        let rect = WGS84_A / (1.0 + n) * (1.0 + n2 / 4.0 + n4 / 64.0 + n6 / 256.0);
        let alpha = [
            n / 2.0 - 2.0 / 3.0 * n2 + 5.0 / 16.0 * n3 + 41.0 / 180.0 * n4 - 127.0 / 288.0 * n5
                + 7891.0 / 37800.0 * n6,
            13.0 / 48.0 * n2 - 3.0 / 5.0 * n3 + 557.0 / 1440.0 * n4 + 281.0 / 630.0 * n5
                - 1983433.0 / 1935360.0 * n6,
            61.0 / 240.0 * n3 - 103.0 / 140.0 * n4 + 15061.0 / 26880.0 * n5
                + 167603.0 / 181440.0 * n6,
            49561.0 / 161280.0 * n4 - 179.0 / 168.0 * n5 + 6601661.0 / 7257600.0 * n6,
            34729.0 / 80640.0 * n5 - 3418889.0 / 1995840.0 * n6,
            212378941.0 / 319334400.0 * n6,
        ];
        let beta = [
            n / 2.0 - 2.0 / 3.0 * n2 + 37.0 / 96.0 * n3 - 1.0 / 360.0 * n4 - 81.0 / 512.0 * n5
                + 96199.0 / 604800.0 * n6,
            1.0 / 48.0 * n2 + 1.0 / 15.0 * n3 - 437.0 / 1440.0 * n4 + 46.0 / 105.0 * n5
                - 1118711.0 / 3870720.0 * n6,
            17.0 / 480.0 * n3 - 37.0 / 840.0 * n4 - 209.0 / 4480.0 * n5 + 5569.0 / 90720.0 * n6,
            4397.0 / 161280.0 * n4 - 11.0 / 504.0 * n5 - 830251.0 / 7257600.0 * n6,
            4583.0 / 161280.0 * n5 - 108847.0 / 3991680.0 * n6,
            20648693.0 / 638668800.0 * n6,
        ];
        Series {
            e: (f * (2.0 - f)).sqrt(),
            k0_a: UTM_K0 * rect,
            alpha,
            beta,
        }
    })
}

/// tan of the conformal latitude from tan of the geodetic latitude.
fn conformal_tan(tau: f64, e: f64) -> f64 {
    let sigma = (e * (e * tau / tau.hypot(1.0)).atanh()).sinh();
    tau * sigma.hypot(1.0) - sigma * tau.hypot(1.0)
}

/// Inverse of [`conformal_tan`] by Newton iteration.
fn geodetic_tan(tau_p: f64, e: f64) -> f64 {
    let e2m = 1.0 - e * e;
    let mut tau = tau_p / e2m;
    for _ in 0..8 {
        let tp = conformal_tan(tau, e);
        let dtau = (tau_p - tp) * (1.0 + e2m * tau * tau)
            / (e2m * tau.hypot(1.0) * tp.hypot(1.0));
        tau += dtau;
        if dtau.abs() <= 1e-15 * tau.abs().max(1.0) {
            break;
        }
    }
    tau
}

/// Project onto a specific zone and hemisphere (false northing follows the
/// hemisphere, not the sign of `lat`).
pub fn project(lat: f64, lon: f64, zone: u8, hemisphere: Hemisphere) -> Result<UtmCoord, GeoError> {
    if !(1..=60).contains(&zone) {
        return Err(GeoError::InvalidZone(zone));
    }
    if !(lat.abs() <= MAX_ABS_LAT) || !lon.is_finite() {
        return Err(GeoError::OutOfDomain { lat, lon });
    }
    let s = series();
    let mut dlon = lon - central_meridian(zone);
    if dlon > 180.0 {
        dlon -= 360.0;
    } else if dlon < -180.0 {
        dlon += 360.0;
    }
    let phi = lat.to_radians();
    let lam = dlon.to_radians();
    let tau_p = conformal_tan(phi.tan(), s.e);
    let (sl, cl) = lam.sin_cos();
    let xi_p = tau_p.atan2(cl);
    let eta_p = (sl / tau_p.hypot(cl)).asinh();

    let mut xi = xi_p;
    let mut eta = eta_p;
    for (j, a) in s.alpha.iter().enumerate() {
        let k = 2.0 * (j + 1) as f64;
        xi += a * (k * xi_p).sin() * (k * eta_p).cosh();
        eta += a * (k * xi_p).cos() * (k * eta_p).sinh();
    }
    let false_northing = match hemisphere {
        Hemisphere::N => 0.0,
        Hemisphere::S => FALSE_NORTHING_SOUTH,
    };
    Ok(UtmCoord {
        easting: FALSE_EASTING + s.k0_a * eta,
        northing: false_northing + s.k0_a * xi,
        zone,
        hemisphere,
    })
}

/// WGS84 geographic to UTM. The zone defaults to the standard 6° band of
/// `lon`; the hemisphere follows the sign of `lat`.
pub fn wgs84_to_utm(lat: f64, lon: f64, forced_zone: Option<u8>) -> Result<UtmCoord, GeoError> {
    if !(lat.abs() <= MAX_ABS_LAT) || !(-180.0..180.0).contains(&lon) {
        return Err(GeoError::OutOfDomain { lat, lon });
    }
    let zone = forced_zone.unwrap_or_else(|| zone_for(lon));
    let hemisphere = if lat >= 0.0 { Hemisphere::N } else { Hemisphere::S };
    project(lat, lon, zone, hemisphere)
}

/// UTM to WGS84 geographic `(lat, lon)` in degrees.
pub fn utm_to_wgs84(coord: &UtmCoord) -> Result<(f64, f64), GeoError> {
    if !(1..=60).contains(&coord.zone) {
        return Err(GeoError::InvalidZone(coord.zone));
    }
    let s = series();
    let false_northing = match coord.hemisphere {
        Hemisphere::N => 0.0,
        Hemisphere::S => FALSE_NORTHING_SOUTH,
    };
    let xi = (coord.northing - false_northing) / s.k0_a;
    let eta = (coord.easting - FALSE_EASTING) / s.k0_a;
    let mut xi_p = xi;
    let mut eta_p = eta;
    for (j, b) in s.beta.iter().enumerate() {
        let k = 2.0 * (j + 1) as f64;
        xi_p -= b * (k * xi).sin() * (k * eta).cosh();
        eta_p -= b * (k * xi).cos() * (k * eta).sinh();
    }
    let sinh_eta = eta_p.sinh();
    let (sx, cx) = xi_p.sin_cos();
    let tau_p = sx / sinh_eta.hypot(cx);
    let lam = sinh_eta.atan2(cx);
    let phi = geodetic_tan(tau_p, s.e).atan();
    Ok((phi.to_degrees(), central_meridian(coord.zone) + lam.to_degrees()))
}
