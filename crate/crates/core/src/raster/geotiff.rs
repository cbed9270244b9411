//! Minimal GeoTIFF georeference reader: ModelPixelScale + ModelTiepoint (or
//! ModelTransformation) for the affine part, GeoKeyDirectory for the EPSG code.

use crate::geo::{GeoError, GeoRef, EPSG_WGS84};
use std::io::{Read, Seek};
use thiserror::Error;
use tiff::decoder::Decoder;
use tiff::tags::Tag;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoTiffError {
    #[error("geokey directory: {0}")]
    Directory(&'static str),
    #[error("no EPSG code in geokeys")]
    NoEpsg,
    #[error("no affine georeference tags")]
    NoTransform,
    #[error("malformed {0} tag")]
    BadTag(&'static str),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error("tiff: {0}")]
    Tiff(String),
}

const KEY_MODEL_TYPE: u16 = 1024;
const KEY_RASTER_TYPE: u16 = 1025;
const KEY_GEOGRAPHIC_TYPE: u16 = 2048;
const KEY_PROJECTED_CS_TYPE: u16 = 3072;
const USER_DEFINED: u16 = 32767;
const PIXEL_IS_POINT: u16 = 2;

/// The short-valued keys this reader cares about.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GeoKeys {
    pub model_type: Option<u16>,
    pub raster_type: Option<u16>,
    pub geographic_type: Option<u16>,
    pub projected_cs_type: Option<u16>,
}

impl GeoKeys {
    pub fn epsg(&self) -> Result<u32, GeoTiffError> {
        if let Some(p) = self.projected_cs_type.filter(|&p| p != USER_DEFINED) {
            return Ok(p as u32);
        }
        match self.geographic_type {
            Some(g) if g as u32 == EPSG_WGS84 => Ok(EPSG_WGS84),
            _ => Err(GeoTiffError::NoEpsg),
        }
    }

    pub fn pixel_is_point(&self) -> bool {
        self.raster_type == Some(PIXEL_IS_POINT)
    }
}

/// Parse a GeoKeyDirectoryTag payload.
pub fn parse_geokeys(dir: &[u16]) -> Result<GeoKeys, GeoTiffError> {
    if dir.len() < 4 {
        return Err(GeoTiffError::Directory("header shorter than 4 shorts"));
    }
    if dir[0] != 1 {
        return Err(GeoTiffError::Directory("unsupported directory version"));
    }
    let n = dir[3] as usize;
    let entries = dir
        .get(4..4 + 4 * n)
        .ok_or(GeoTiffError::Directory("key count exceeds directory"))?;
    let mut keys = GeoKeys::default();
    for e in entries.chunks_exact(4) {
        let (id, location, count, value) = (e[0], e[1], e[2], e[3]);
        // only inline SHORT values are meaningful for the keys we read
        if location != 0 || count != 1 {
            continue;
        }
        match id {
            KEY_MODEL_TYPE => keys.model_type = Some(value),
            KEY_RASTER_TYPE => keys.raster_type = Some(value),
            KEY_GEOGRAPHIC_TYPE => keys.geographic_type = Some(value),
            KEY_PROJECTED_CS_TYPE => keys.projected_cs_type = Some(value),
            _ => {}
        }
    }
    Ok(keys)
}

/// Build a [`GeoRef`] from raw tag values.
pub fn georef_from_tags(
    pixel_scale: Option<&[f64]>,
    tiepoint: Option<&[f64]>,
    transformation: Option<&[f64]>,
    keys: &GeoKeys,
) -> Result<GeoRef, GeoTiffError> {
    let epsg = keys.epsg()?;
    let half = if keys.pixel_is_point() { 0.5 } else { 0.0 };
    let transform = if let Some(m) = transformation {
        if m.len() != 16 {
            return Err(GeoTiffError::BadTag("ModelTransformation"));
        }
        let (a, b, d, e) = (m[0], m[1], m[4], m[5]);
        // PixelIsPoint: model coordinates refer to pixel centres
        [a, b, m[3] - half * (a + b), d, e, m[7] - half * (d + e)]
    } else {
        let (scale, tie) = match (pixel_scale, tiepoint) {
            (Some(s), Some(t)) => (s, t),
            _ => return Err(GeoTiffError::NoTransform),
        };
        if scale.len() < 2 {
            return Err(GeoTiffError::BadTag("ModelPixelScale"));
        }
        if tie.len() < 6 {
            return Err(GeoTiffError::BadTag("ModelTiepoint"));
        }
        let (sx, sy) = (scale[0], scale[1]);
        let (i, j, x, y) = (tie[0] + half, tie[1] + half, tie[3], tie[4]);
        [sx, 0.0, x - i * sx, 0.0, -sy, y + j * sy]
    };
    Ok(GeoRef::new(epsg, transform)?)
}

/// Read the georeference of a TIFF, `Ok(None)` when it carries no geokeys.
pub fn read_geotiff_georef<R: Read + Seek>(reader: R) -> Result<Option<GeoRef>, GeoTiffError> {
    let terr = |e: tiff::TiffError| GeoTiffError::Tiff(e.to_string());
    let mut dec = Decoder::new(reader).map_err(terr)?;
    let Some(dir) = dec
        .find_tag_unsigned_vec::<u16>(Tag::GeoKeyDirectoryTag)
        .map_err(terr)?
    else {
        return Ok(None);
    };
    let keys = parse_geokeys(&dir)?;
    let f64s = |dec: &mut Decoder<R>, tag: Tag| -> Result<Option<Vec<f64>>, GeoTiffError> {
        match dec.find_tag(tag).map_err(terr)? {
            None => Ok(None),
            Some(v) => v.into_f64_vec().map(Some).map_err(terr),
        }
    };
    let scale = f64s(&mut dec, Tag::ModelPixelScaleTag)?;
    let tie = f64s(&mut dec, Tag::ModelTiepointTag)?;
    let mt = f64s(&mut dec, Tag::ModelTransformationTag)?;
    georef_from_tags(scale.as_deref(), tie.as_deref(), mt.as_deref(), &keys).map(Some)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;
    use tiff::encoder::{colortype, TiffEncoder};

    fn keys_dir(pairs: &[(u16, u16)]) -> Vec<u16> {
        let mut d = vec![1, 1, 0, pairs.len() as u16];
        for &(k, v) in pairs {
            d.extend([k, 0, 1, v]);
        }
        d
    }

    #[test]
    fn parses_projected_keys() {
        let k = parse_geokeys(&keys_dir(&[(1024, 1), (1025, 1), (3072, 32610)])).unwrap();
        assert_eq!(k.epsg().unwrap(), 32610);
        assert!(!k.pixel_is_point());
        let k = parse_geokeys(&keys_dir(&[(1024, 2), (2048, 4326)])).unwrap();
        assert_eq!(k.epsg().unwrap(), 4326);
    }

    #[test]
    fn directory_errors() {
        assert!(parse_geokeys(&[1, 1]).is_err());
        assert!(parse_geokeys(&[2, 1, 0, 0]).is_err());
        assert!(parse_geokeys(&[1, 1, 0, 3, 1024, 0, 1, 1]).is_err());
        let k = parse_geokeys(&keys_dir(&[(3072, USER_DEFINED)])).unwrap();
        assert_eq!(k.epsg(), Err(GeoTiffError::NoEpsg));
    }

    #[test]
    fn tiepoint_and_scale_to_affine() {
        let keys = parse_geokeys(&keys_dir(&[(3072, 32610)])).unwrap();
        let g = georef_from_tags(
            Some(&[3.0, 3.0, 0.0]),
            Some(&[0.0, 0.0, 0.0, 600000.0, 4200000.0, 0.0]),
            None,
            &keys,
        )
        .unwrap();
        assert_eq!(g.transform, [3.0, 0.0, 600000.0, 0.0, -3.0, 4200000.0]);

        let point = parse_geokeys(&keys_dir(&[(3072, 32610), (1025, 2)])).unwrap();
        let g = georef_from_tags(
            Some(&[3.0, 3.0, 0.0]),
            Some(&[0.0, 0.0, 0.0, 600001.5, 4199998.5, 0.0]),
            None,
            &point,
        )
        .unwrap();
        assert_eq!(g.transform, [3.0, 0.0, 600000.0, 0.0, -3.0, 4200000.0]);
    }

    #[test]
    fn reads_tags_from_encoded_tiff() {
        let mut buf = Cursor::new(Vec::new());
        {
            let mut enc = TiffEncoder::new(&mut buf).unwrap();
            let mut img = enc.new_image::<colortype::Gray8>(4, 2).unwrap();
            img.encoder()
                .write_tag(Tag::ModelPixelScaleTag, &[10.0f64, 10.0, 0.0][..])
                .unwrap();
            img.encoder()
                .write_tag(
                    Tag::ModelTiepointTag,
                    &[0.0f64, 0.0, 0.0, 399960.0, 4200000.0, 0.0][..],
                )
                .unwrap();
            img.encoder()
                .write_tag(Tag::GeoKeyDirectoryTag, &keys_dir(&[(1024, 1), (3072, 32611)])[..])
                .unwrap();
            img.write_data(&[0u8; 8]).unwrap();
        }
        buf.set_position(0);
        let g = read_geotiff_georef(buf).unwrap().unwrap();
        assert_eq!(g.epsg, 32611);
        assert_eq!(g.transform, [10.0, 0.0, 399960.0, 0.0, -10.0, 4200000.0]);
    }
}
