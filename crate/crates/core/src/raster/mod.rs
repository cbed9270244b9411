//! Georeferenced imagery, cloud masks and overlapping tiling.

mod bundle;
mod geotiff;
mod pixels;
mod tile;

pub use bundle::{load_bundle, Provider, RasterBundle, Sidecar};
pub use geotiff::{georef_from_tags, parse_geokeys, read_geotiff_georef, GeoKeys, GeoTiffError};
pub use pixels::{percentile_stretch, BinaryMask, Pixels, SampleDepth, StretchWindow};
pub use tile::{
    clip_boxes_to_tile, clip_boxes_to_window, extract_tile, tile_plan, Tile, DEFAULT_OVERLAP, DEFAULT_TILE_SIZE,
    MIN_INSIDE_FRACTION,
};

use crate::geo::GeoError;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RasterError {
    #[error("georeference mismatch: {0}")]
    GeoMismatch(String),
    #[error("cannot decode image: {0}")]
    Decode(String),
    #[error("missing georeference sidecar: {0}")]
    MissingGeoRef(String),
    #[error("invalid sidecar: {0}")]
    Sidecar(String),
    #[error("inconsistent ground sample distance: {0}")]
    Gsd(String),
    #[error("invalid tiling: size {size} must exceed overlap {overlap}")]
    Config { size: u32, overlap: u32 },
    #[error(transparent)]
    Geo(#[from] GeoError),
}
