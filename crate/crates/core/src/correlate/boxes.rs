use super::{AnnotationBox, CorrelateError, ShipObservation};
use crate::geo::{geo_to_pixel, GeoRef};
use crate::geom::PixelBox;
use crate::raster::BinaryMask;

/// Square box of side `scale * length / gsd` centred on the observation,
/// clipped to the image. Ships whose box lies wholly outside are `OffImage`.
pub fn make_box(
    image_id: &str,
    obs: &ShipObservation,
    georef: &GeoRef,
    gsd_m: f64,
    scale: f64,
    dims: (u32, u32),
) -> Result<AnnotationBox, CorrelateError> {
    if !(gsd_m > 0.0) || !(scale > 0.0) || !(obs.length_m > 0.0) {
        return Err(CorrelateError::InvalidBox(format!(
            "gsd {gsd_m}, scale {scale}, length {}",
            obs.length_m
        )));
    }
    let (cx, cy) = geo_to_pixel(georef, obs.mean_lat, obs.mean_lon)?;
    let side = scale * obs.length_m / gsd_m;
    let full = PixelBox::centered(cx, cy, side);
    let clipped = full
        .clip(dims.0 as f64, dims.1 as f64)
        .ok_or(CorrelateError::OffImage { mmsi: obs.mmsi })?;
    Ok(AnnotationBox::auto(image_id, Some(obs.mmsi), clipped, obs.length_m))
}

/// Integer pixel window `[x0, x1) x [y0, y1)` of a box, rounded and clamped
/// to the image.
pub fn rounded_window(b: &PixelBox, width: u32, height: u32) -> (u32, u32, u32, u32) {
    let r = |v: f64, hi: u32| -> u32 {
        if v.is_nan() {
            0
        } else {
            v.round().clamp(0.0, hi as f64) as u32
        }
    };
    (
        r(b.x_min, width),
        r(b.y_min, height),
        r(b.x_max, width),
        r(b.y_max, height),
    )
}

/// Share of cloudy mask pixels inside the box's rounded window; 1.0 when the
/// window is empty.
pub fn cloud_fraction(b: &PixelBox, mask: &BinaryMask) -> f64 {
    let (x0, y0, x1, y1) = rounded_window(b, mask.width(), mask.height());
    if x0 >= x1 || y0 >= y1 {
        return 1.0;
    }
    let mut cloudy = 0usize;
    for y in y0..y1 {
        for x in x0..x1 {
            cloudy += mask.get(x, y) as usize;
        }
    }
    cloudy as f64 / ((x1 - x0) as f64 * (y1 - y0) as f64)
}
