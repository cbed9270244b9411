use super::{CatalogError, ExportPolicy};
use crate::airbus::{AugmentSpec, LengthMode, AIRBUS_GSD_M, MIN_LENGTH_M};
use crate::correlate::CorrelateConfig;
use crate::detect::{DetectorSpec, CONFIDENCE_FLOOR, DEFAULT_IOU_THRESHOLD};
use crate::eval::BinSpec;
use crate::raster::{DEFAULT_OVERLAP, DEFAULT_TILE_SIZE};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TilingSection {
    pub size: u32,
    pub overlap: u32,
}

impl Default for TilingSection {
    fn default() -> Self {
        TilingSection {
            size: DEFAULT_TILE_SIZE,
            overlap: DEFAULT_OVERLAP,
        }
    }
}

/// Percentile window for 16-bit to 8-bit conversion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RasterSection {
    pub stretch_low_pct: f64,
    pub stretch_high_pct: f64,
}

impl Default for RasterSection {
    fn default() -> Self {
        RasterSection {
            stretch_low_pct: 2.0,
            stretch_high_pct: 98.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectSection {
    pub detector: DetectorSpec,
    pub iou_threshold: f64,
    pub confidence_floor: f64,
}

impl Default for DetectSection {
    fn default() -> Self {
        DetectSection {
            detector: DetectorSpec::default(),
            iou_threshold: DEFAULT_IOU_THRESHOLD,
            confidence_floor: CONFIDENCE_FLOOR,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AirbusSection {
    pub min_length_m: f64,
    pub gsd_m: f64,
    pub length_mode: LengthMode,
    pub augment: AugmentSpec,
}

impl Default for AirbusSection {
    fn default() -> Self {
        AirbusSection {
            min_length_m: MIN_LENGTH_M,
            gsd_m: AIRBUS_GSD_M,
            length_mode: LengthMode::Major,
            augment: AugmentSpec::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExportSection {
    pub policy: ExportPolicy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReviewSection {
    pub port: u16,
    pub page_size: usize,
    pub actor: String,
}

impl Default for ReviewSection {
    fn default() -> Self {
        ReviewSection {
            port: 8080,
            page_size: 50,
            actor: "reviewer".into(),
        }
    }
}

/// Pipeline settings, read from a TOML file. Every key is optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub correlate: CorrelateConfig,
    pub tiling: TilingSection,
    pub raster: RasterSection,
    pub detect: DetectSection,
    pub airbus: AirbusSection,
    pub bins: BinSpec,
    pub export: ExportSection,
    pub review: ReviewSection,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Config, CatalogError> {
        let cfg: Config = toml::from_str(text).map_err(|e| CatalogError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Config, CatalogError> {
        let text = std::fs::read_to_string(path).map_err(super::io_err(path))?;
        Config::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CatalogError> {
        let bad = |m: String| Err(CatalogError::Config(m));
        if self.correlate.window_s < 0 {
            return bad(format!("correlate.window_s {} is negative", self.correlate.window_s));
        }
        if self.tiling.size == 0 || self.tiling.overlap >= self.tiling.size {
            return bad(format!(
                "tiling overlap {} must be below size {}",
                self.tiling.overlap, self.tiling.size
            ));
        }
        let r = &self.raster;
        if !(0.0 <= r.stretch_low_pct && r.stretch_low_pct < r.stretch_high_pct && r.stretch_high_pct <= 100.0) {
            return bad(format!(
                "stretch percentiles {} / {} out of order",
                r.stretch_low_pct, r.stretch_high_pct
            ));
        }
        self.detect.detector.validate().map_err(|e| CatalogError::Config(e.to_string()))?;
        if !(0.0..=1.0).contains(&self.detect.iou_threshold) || !(0.0..=1.0).contains(&self.detect.confidence_floor) {
            return bad("detect thresholds must lie in [0, 1]".into());
        }
        if !(self.airbus.gsd_m > 0.0) {
            return bad("airbus.gsd_m must be positive".into());
        }
        self.airbus.augment.validate().map_err(|e| CatalogError::Config(e.to_string()))?;
        self.bins.validate().map_err(CatalogError::Config)?;
        if self.review.page_size == 0 {
            return bad("review.page_size must be positive".into());
        }
        Ok(())
    }
}
