//! Detector abstraction: a thresholding baseline, a file-exchange protocol for
//! external detectors, tile-to-image merging and non-maximum suppression.

mod baseline;
mod external;

pub use baseline::{detect_baseline, otsu_threshold, BaselineParams, Threshold};
pub use external::{parse_response, run_external, ExternalParams, TileRequest};

use crate::geom::PixelBox;
use crate::raster::Tile;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::path::PathBuf;
use thiserror::Error;

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;
/// Detections below this confidence are discarded before suppression.
pub const CONFIDENCE_FLOOR: f64 = 0.20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectError {
    #[error("external detector did not answer within {0} s")]
    ExternalTimeout(f64),
    #[error("external detector failed: {0}")]
    ExternalFailed(String),
    #[error("protocol violation in {record}: {reason}")]
    Protocol { record: String, reason: String },
    #[error("exchange directory {0} is in use")]
    Busy(PathBuf),
    #[error("io: {0}")]
    Io(String),
    #[error("invalid detector configuration: {0}")]
    Config(String),
}

impl From<std::io::Error> for DetectError {
    fn from(e: std::io::Error) -> Self {
        DetectError::Io(e.to_string())
    }
}

/// Coordinate frame of a detection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    Tile { origin: (u32, u32) },
    Image,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    #[serde(rename = "box")]
    pub bbox: PixelBox,
    pub confidence: f64,
    pub space: Space,
}

impl Detection {
    pub fn is_valid(&self) -> bool {
        self.bbox.is_valid() && (0.0..=1.0).contains(&self.confidence)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum DetectorSpec {
    Baseline(BaselineParams),
    External(ExternalParams),
}

impl Default for DetectorSpec {
    fn default() -> Self {
        DetectorSpec::Baseline(BaselineParams::default())
    }
}

impl DetectorSpec {
    pub fn validate(&self) -> Result<(), DetectError> {
        match self {
            DetectorSpec::Baseline(p) if p.min_area_px < 1 => {
                Err(DetectError::Config("min_area_px must be at least 1".into()))
            }
            DetectorSpec::External(p) if !(p.timeout_s > 0.0) => {
                Err(DetectError::Config("timeout_s must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Run a detector over tiles; results are in each tile's own frame.
pub fn detect_tiles(tiles: &[Tile], spec: &DetectorSpec) -> Result<Vec<Vec<Detection>>, DetectError> {
    spec.validate()?;
    match spec {
        DetectorSpec::Baseline(p) => Ok(tiles.iter().map(|t| detect_baseline(&t.pixels, t.origin, p)).collect()),
        DetectorSpec::External(p) => {
            let mut by_id = run_external(tiles, p)?;
            Ok(tiles
                .iter()
                .map(|t| {
                    by_id
                        .remove(&t.id())
                        .unwrap_or_default()
                        .into_iter()
                        .map(|mut d| {
                            d.space = Space::Tile { origin: t.origin };
                            d
                        })
                        .collect()
                })
                .collect())
        }
    }
}

pub fn iou(a: &PixelBox, b: &PixelBox) -> f64 {
    a.iou(b)
}

/// Translate tile-frame detections by the tile origin.
pub fn to_image_space(detections: &[Detection], origin: (u32, u32)) -> Vec<Detection> {
    detections
        .iter()
        .map(|d| Detection {
            bbox: d.bbox.translate(origin.0 as f64, origin.1 as f64),
            confidence: d.confidence,
            space: Space::Image,
        })
        .collect()
}

/// Inverse of [`to_image_space`].
pub fn to_tile_space(detections: &[Detection], origin: (u32, u32)) -> Vec<Detection> {
    detections
        .iter()
        .map(|d| Detection {
            bbox: d.bbox.translate(-(origin.0 as f64), -(origin.1 as f64)),
            confidence: d.confidence,
            space: Space::Tile { origin },
        })
        .collect()
}

/// Confidence descending, then larger area, then lexicographic box.
pub fn rank_order(a: &Detection, b: &Detection) -> Ordering {
    b.confidence
        .total_cmp(&a.confidence)
        .then_with(|| b.bbox.area().total_cmp(&a.bbox.area()))
        .then_with(|| a.bbox.x_min.total_cmp(&b.bbox.x_min))
        .then_with(|| a.bbox.y_min.total_cmp(&b.bbox.y_min))
        .then_with(|| a.bbox.x_max.total_cmp(&b.bbox.x_max))
        .then_with(|| a.bbox.y_max.total_cmp(&b.bbox.y_max))
}

/// Greedy non-maximum suppression after a strict `< floor` confidence cut.
pub fn nms(detections: &[Detection], iou_threshold: f64, confidence_floor: f64) -> Vec<Detection> {
    let mut pool: Vec<Detection> = detections
        .iter()
        .filter(|d| d.confidence >= confidence_floor)
        .copied()
        .collect();
    pool.sort_by(rank_order);
    let mut keep: Vec<Detection> = Vec::with_capacity(pool.len());
    for d in pool {
        if keep.iter().all(|k| k.bbox.iou(&d.bbox) <= iou_threshold) {
            keep.push(d);
        }
    }
    keep
}

/// Move per-tile detections into the image frame and suppress duplicates.
pub fn merge_tiles(per_tile: &[(( u32, u32), Vec<Detection>)], iou_threshold: f64, confidence_floor: f64) -> Vec<Detection> {
    let all: Vec<Detection> = per_tile
        .iter()
        .flat_map(|(origin, dets)| to_image_space(dets, *origin))
        .collect();
    nms(&all, iou_threshold, confidence_floor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn det(b: [f64; 4], c: f64) -> Detection {
        Detection { bbox: b.into(), confidence: c, space: Space::Image }
    }

    #[test]
    fn translation() {
        let d = [Detection { bbox: [10.0, 10.0, 20.0, 20.0].into(), confidence: 0.5, space: Space::Tile { origin: (600, 0) } }];
        let img = to_image_space(&d, (600, 0));
        assert_eq!(img[0].bbox, PixelBox::new(610.0, 10.0, 620.0, 20.0));
        assert_eq!(img[0].space, Space::Image);
        assert_eq!(to_tile_space(&img, (600, 0)), d.to_vec());
        assert_eq!(to_image_space(&d, (0, 0))[0].bbox, d[0].bbox);
    }

    #[test]
    fn nms_examples() {
        let a = det([0.0, 0.0, 10.0, 10.0], 0.9);
        assert_eq!(nms(&[a], 0.5, 0.2), vec![a]);
        let b = det([0.0, 0.0, 10.0, 10.0], 0.8);
        assert_eq!(nms(&[b, a], 0.5, 0.2), vec![a]);
        assert!(nms(&[det([0.0, 0.0, 1.0, 1.0], 0.19)], 0.5, 0.2).is_empty());
        assert_eq!(nms(&[det([0.0, 0.0, 1.0, 1.0], 0.20)], 0.5, 0.2).len(), 1);
        // equal confidence: larger box wins
        let small = det([0.0, 0.0, 10.0, 9.0], 0.7);
        let big = det([0.0, 0.0, 10.0, 10.0], 0.7);
        assert_eq!(nms(&[small, big], 0.5, 0.2), vec![big]);
        assert_eq!(iou(&[0.0, 0.0, 2.0, 2.0].into(), &[1.0, 1.0, 3.0, 3.0].into()), 1.0 / 7.0);
    }

    #[test]
    fn overlap_duplicate_collapses() {
        // ship at x 590..610 of the image, seen by the tiles at 0 and 600
        let t0 = vec![Detection { bbox: [590.0, 100.0, 610.0, 106.0].into(), confidence: 0.9, space: Space::Tile { origin: (0, 0) } }];
        let t1 = vec![Detection { bbox: [-10.0, 100.0, 10.0, 106.0].into(), confidence: 0.9, space: Space::Tile { origin: (600, 0) } }];
        let merged = merge_tiles(&[((0, 0), t0), ((600, 0), t1)], 0.5, 0.2);
        assert_eq!(merged.len(), 1);
    }

    /// Reference: repeatedly take the best remaining detection and delete
    /// everything overlapping it, rescanning from scratch each round.
    pub(crate) fn brute_nms(dets: &[Detection], thr: f64, floor: f64) -> Vec<Detection> {
        let mut rest: Vec<Detection> = dets.iter().filter(|d| !(d.confidence < floor)).copied().collect();
        let mut out = Vec::new();
        while !rest.is_empty() {
            let mut best = 0;
            for i in 1..rest.len() {
                if rank_order(&rest[i], &rest[best]) == Ordering::Less {
                    best = i;
                }
            }
            let head = rest.remove(best);
            rest.retain(|d| !(head.bbox.iou(&d.bbox) > thr));
            out.push(head);
        }
        out
    }

    fn scene() -> impl Strategy<Value = Vec<Detection>> {
        prop::collection::vec(
            (0.0f64..60.0, 0.0f64..60.0, 1.0f64..30.0, 1.0f64..30.0, 0u8..=10),
            0..50,
        )
        .prop_map(|v| {
            v.into_iter()
                .map(|(x, y, w, h, c)| det([x.round(), y.round(), (x + w).round() + 1.0, (y + h).round() + 1.0], c as f64 / 10.0))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn matches_brute_force(d in scene()) {
            let fast = nms(&d, 0.5, 0.2);
            prop_assert_eq!(&fast, &brute_nms(&d, 0.5, 0.2));
            prop_assert_eq!(nms(&fast, 0.5, 0.2), fast.clone());
            for (i, a) in fast.iter().enumerate() {
                prop_assert!(d.contains(a));
                for b in &fast[i + 1..] {
                    prop_assert!(a.bbox.iou(&b.bbox) <= 0.5);
                }
            }
        }
    }
}
