//! AIS-to-image correlation: stationary ship selection, length-sized boxes
//! and cloud-coverage flags.

mod boxes;
mod select;

pub use boxes::{cloud_fraction, make_box, rounded_window};
pub use select::{select_stationary, AisIndex, ShipObservation, WindowMode};

use crate::ais::AisRecord;
use crate::geo::GeoError;
use crate::geom::PixelBox;
use crate::raster::RasterBundle;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Boxes whose cloud fraction exceeds this are flagged.
pub const CLOUD_FLAG_THRESHOLD: f64 = 0.20;
pub const DEFAULT_WINDOW_S: i64 = 300;
pub const MIN_SHIP_LENGTH_M: f64 = 30.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorrelateError {
    #[error("ship {mmsi} projects outside the image")]
    OffImage { mmsi: u32 },
    #[error("invalid box: {0}")]
    InvalidBox(String),
    #[error(transparent)]
    Geo(#[from] GeoError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Curation {
    #[default]
    Auto,
    Accepted,
    Rejected,
}

impl Curation {
    pub fn as_str(self) -> &'static str {
        match self {
            Curation::Auto => "auto",
            Curation::Accepted => "accepted",
            Curation::Rejected => "rejected",
        }
    }
}

impl std::str::FromStr for Curation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(Curation::Auto),
            "accepted" => Ok(Curation::Accepted),
            "rejected" => Ok(Curation::Rejected),
            other => Err(format!("unknown curation state {other:?}")),
        }
    }
}

/// Weak ship annotation in parent (or tile) pixel coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotationBox {
    pub image_id: String,
    /// `None` for annotations that do not come from AIS.
    pub mmsi: Option<u32>,
    #[serde(rename = "box")]
    pub bbox: PixelBox,
    pub length_m: f64,
    pub cloud_fraction: f64,
    pub flagged: bool,
    #[serde(default)]
    pub curation: Curation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

impl AnnotationBox {
    /// Cloud-free, uncurated annotation.
    pub fn auto(image_id: &str, mmsi: Option<u32>, bbox: PixelBox, length_m: f64) -> Self {
        AnnotationBox {
            image_id: image_id.to_string(),
            mmsi,
            bbox,
            length_m,
            cloud_fraction: 0.0,
            flagged: false,
            curation: Curation::Auto,
            source: None,
        }
    }

    /// Identifier stable across tiling: `<image_id>:<mmsi>`, or the box
    /// corners when no MMSI is attached.
    pub fn annotation_id(&self) -> String {
        match self.mmsi {
            Some(m) => format!("{}:{m}", self.image_id),
            None => {
                let b = self.bbox;
                format!("{}:{}_{}_{}_{}", self.image_id, b.x_min, b.y_min, b.x_max, b.y_max)
            }
        }
    }

    pub fn set_cloud_fraction(&mut self, fraction: f64) {
        self.cloud_fraction = fraction;
        self.flagged = fraction > CLOUD_FLAG_THRESHOLD;
    }

    pub fn check(&self) -> Result<(), CorrelateError> {
        if !self.bbox.is_valid() {
            return Err(CorrelateError::InvalidBox(format!("degenerate box {:?}", self.bbox)));
        }
        if !(0.0..=1.0).contains(&self.cloud_fraction) {
            return Err(CorrelateError::InvalidBox(format!(
                "cloud fraction {} outside [0, 1]",
                self.cloud_fraction
            )));
        }
        if self.flagged != (self.cloud_fraction > CLOUD_FLAG_THRESHOLD) {
            return Err(CorrelateError::InvalidBox("flag disagrees with cloud fraction".into()));
        }
        Ok(())
    }
}

/// Tunables for [`annotate_image`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorrelateConfig {
    pub window_s: i64,
    pub window_mode: WindowMode,
    /// Status codes treated as moving.
    pub excluded_statuses: Vec<u8>,
    pub min_length_m: f64,
}

impl Default for CorrelateConfig {
    fn default() -> Self {
        CorrelateConfig {
            window_s: DEFAULT_WINDOW_S,
            window_mode: WindowMode::Centered,
            excluded_statuses: vec![0],
            min_length_m: MIN_SHIP_LENGTH_M,
        }
    }
}

impl CorrelateConfig {
    pub fn window(&self, t_image: i64) -> (i64, i64) {
        match self.window_mode {
            WindowMode::Centered => (t_image - self.window_s / 2, t_image + self.window_s / 2),
            WindowMode::Trailing => (t_image - self.window_s, t_image),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotateCounters {
    pub observations: usize,
    pub matched: usize,
    pub off_image: usize,
    pub flagged: usize,
}

/// Training boxes (length-sized) and display boxes (twice the length).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Annotated {
    pub boxes: Vec<AnnotationBox>,
    pub display_boxes: Vec<AnnotationBox>,
    pub counters: AnnotateCounters,
}

/// Select stationary ships in the capture window and box them on the image.
pub fn annotate_image(
    bundle: &RasterBundle,
    index: &AisIndex,
    config: &CorrelateConfig,
) -> Result<Annotated, CorrelateError> {
    let observations = select_stationary(index, bundle.timestamp(), config);
    let mut out = Annotated {
        counters: AnnotateCounters {
            observations: observations.len(),
            ..Default::default()
        },
        ..Default::default()
    };
    let dims = (bundle.width(), bundle.height());
    for obs in &observations {
        let boxed = make_box(bundle.id(), obs, &bundle.georef(), bundle.gsd_m(), 1.0, dims);
        let mut b = match boxed {
            Ok(b) => b,
            Err(CorrelateError::OffImage { .. }) => {
                out.counters.off_image += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let fraction = bundle.cloud_mask().map_or(0.0, |m| cloud_fraction(&b.bbox, m));
        b.set_cloud_fraction(fraction);
        out.counters.matched += 1;
        out.counters.flagged += b.flagged as usize;
        if let Ok(mut d) = make_box(bundle.id(), obs, &bundle.georef(), bundle.gsd_m(), 2.0, dims) {
            d.set_cloud_fraction(fraction);
            out.display_boxes.push(d);
        }
        out.boxes.push(b);
    }
    Ok(out)
}

/// Convenience wrapper for callers holding a flat record list.
pub fn annotate_records(
    bundle: &RasterBundle,
    records: &[AisRecord],
    config: &CorrelateConfig,
) -> Result<Annotated, CorrelateError> {
    annotate_image(bundle, &AisIndex::new(records.to_vec()), config)
}
