//! Kaggle Airbus ship masks: RLE decoding, box and length fitting, the
//! 50 m length filter and training augmentations.

mod augment;
mod rect;
mod rle;

pub use augment::{
    augment, augment_all, augment_annotations, item_rng, rotate_point, AugmentOp, AugmentSpec, BLUR_SIGMA_RANGE,
    MIN_VISIBLE_FRACTION, ROTATE_RANGE_DEG, SCALE_RANGE,
};
pub use rect::{
    fit_bbox, fit_bbox_rle, length_px_rle, min_area_rect, min_area_rect_rle, LengthMode,
    RotatedRect, AIRBUS_GSD_M,
};
pub use rle::{decode_rle, encode_rle, RleMask, AIRBUS_SIZE};

use crate::correlate::AnnotationBox;
use std::collections::BTreeSet;
use std::io::Read;
use thiserror::Error;

/// Ships must be strictly longer than this to be kept.
pub const MIN_LENGTH_M: f64 = 50.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AirbusError {
    #[error("rle: {0}")]
    Rle(String),
    #[error("mask has no set pixels")]
    EmptyMask,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("index line {line}: {reason}")]
    Index { line: u64, reason: String },
}

/// One row of the Kaggle segmentation index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexRow {
    pub image_id: String,
    /// `None` for images without ships.
    pub encoded_pixels: Option<String>,
}

/// Read an `ImageId,EncodedPixels` CSV (header required, any column order).
pub fn read_kaggle_index<R: Read>(input: R) -> Result<Vec<IndexRow>, AirbusError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let header = rdr
        .headers()
        .map_err(|e| AirbusError::Index { line: 1, reason: e.to_string() })?
        .clone();
    let col = |name: &str| header.iter().position(|h| h.trim().eq_ignore_ascii_case(name));
    let (Some(ic), Some(pc)) = (col("ImageId"), col("EncodedPixels")) else {
        return Err(AirbusError::Index {
            line: 1,
            reason: "header needs ImageId and EncodedPixels".into(),
        });
    };
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec.map_err(|e| AirbusError::Index { line, reason: e.to_string() })?;
        let image_id = rec.get(ic).unwrap_or("").trim();
        if image_id.is_empty() {
            return Err(AirbusError::Index { line, reason: "empty ImageId".into() });
        }
        let px = rec.get(pc).unwrap_or("").trim();
        rows.push(IndexRow {
            image_id: image_id.to_string(),
            encoded_pixels: (!px.is_empty()).then(|| px.to_string()),
        });
    }
    Ok(rows)
}

/// Box plus oriented-rectangle length for one Airbus mask.
#[derive(Clone, Debug, PartialEq)]
pub struct AirbusShip {
    pub annotation: AnnotationBox,
    pub rect: RotatedRect,
}

/// Fit the axis-aligned box and length of one mask.
pub fn ship_from_rle(
    image_id: &str,
    rle: &RleMask,
    mode: LengthMode,
    gsd_m: f64,
) -> Result<AirbusShip, AirbusError> {
    let rect = min_area_rect_rle(rle)?;
    let bbox = fit_bbox_rle(rle)?;
    let length_px = match mode {
        LengthMode::Major => rect.length_px(),
        LengthMode::Diameter => length_px_rle(rle, mode)?,
    };
    let mut annotation = AnnotationBox::auto(image_id, None, bbox, length_px * gsd_m);
    annotation.source = Some("airbus".into());
    Ok(AirbusShip { annotation, rect })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FilterCounts {
    pub kept: usize,
    pub dropped: usize,
}

/// Keep annotations strictly longer than `min_m`.
pub fn filter_by_length(annotations: Vec<AnnotationBox>, min_m: f64) -> (Vec<AnnotationBox>, FilterCounts) {
    let total = annotations.len();
    let kept: Vec<AnnotationBox> = annotations.into_iter().filter(|a| a.length_m > min_m).collect();
    let counts = FilterCounts { kept: kept.len(), dropped: total - kept.len() };
    (kept, counts)
}

#[derive(Clone, Debug, Default, PartialEq, serde::Serialize)]
pub struct PrepareSummary {
    pub rows: usize,
    pub images: usize,
    pub images_with_ships: usize,
    pub masks: usize,
    pub bad_masks: usize,
    pub kept_images: usize,
    pub kept_annotations: usize,
}

/// Fit every mask in the index and apply the length filter.
pub fn prepare_index(
    rows: &[IndexRow],
    mode: LengthMode,
    gsd_m: f64,
    min_m: f64,
) -> (Vec<AnnotationBox>, PrepareSummary) {
    let mut summary = PrepareSummary { rows: rows.len(), ..Default::default() };
    let mut images = BTreeSet::new();
    let mut with_ships = BTreeSet::new();
    let mut fitted = Vec::new();
    for row in rows {
        images.insert(row.image_id.as_str());
        let Some(px) = &row.encoded_pixels else { continue };
        with_ships.insert(row.image_id.as_str());
        summary.masks += 1;
        match RleMask::parse(px).and_then(|r| ship_from_rle(&row.image_id, &r, mode, gsd_m)) {
            Ok(s) => fitted.push(s.annotation),
            Err(e) => {
                log::warn!("{}: {e}", row.image_id);
                summary.bad_masks += 1;
            }
        }
    }
    let (kept, _) = filter_by_length(fitted, min_m);
    summary.images = images.len();
    summary.images_with_ships = with_ships.len();
    summary.kept_annotations = kept.len();
    summary.kept_images = kept.iter().map(|a| a.image_id.as_str()).collect::<BTreeSet<_>>().len();
    (kept, summary)
}
