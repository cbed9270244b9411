//! Synthetic georeferenced scenes with matching AIS streams.
//!
//! A scene is a dark, noisy UTM raster with bright rotated ship hulls at
//! known positions, one hazy cloud block over two of them, and AIS reports
//! for every ship plus a few streams the correlation rules must reject.

use crate::ais::{AisRecord, NavStatus};
use crate::catalog::{image_dir, CatalogError};
use crate::geo::{pixel_to_geo, GeoError};
use crate::jsonl;
use crate::raster::{BinaryMask, Pixels, Provider, RasterBundle, RasterError, SampleDepth, Sidecar};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fs;
use std::path::Path;

pub const SCENE_SIZE: u32 = 2000;
pub const SCENE_GSD_M: f64 = 3.0;
pub const SCENE_TIME: &str = "2016-07-01T18:30:00Z";
const SHIP_LENGTHS_M: [f64; 12] = [60.0, 85.0, 110.0, 135.0, 160.0, 185.0, 210.0, 240.0, 270.0, 300.0, 330.0, 350.0];
const MOORED: u8 = 5;
const UNDER_WAY: u8 = 0;

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticShip {
    pub mmsi: u32,
    /// Hull centre `(col, row)`.
    pub pixel: (f64, f64),
    pub length_m: f64,
    pub heading_deg: f64,
    /// Under the cloud block.
    pub clouded: bool,
}

#[derive(Clone, Debug)]
pub struct SyntheticScene {
    pub bundle: RasterBundle,
    pub ships: Vec<SyntheticShip>,
    /// Reports for every ship and for the distractor streams, time ordered.
    pub records: Vec<AisRecord>,
    /// Cloud block `[x0, x1) x [y0, y1)`.
    pub cloud: (u32, u32, u32, u32),
}

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

fn in_hull(x: f64, y: f64, s: &SyntheticShip, len_px: f64, beam_px: f64) -> bool {
    let (sin, cos) = s.heading_deg.to_radians().sin_cos();
    let (dx, dy) = (x - s.pixel.0, y - s.pixel.1);
    let along = dx * cos + dy * sin;
    let across = -dx * sin + dy * cos;
    along.abs() <= len_px / 2.0 && across.abs() <= beam_px / 2.0
}

fn status(code: u8) -> NavStatus {
    NavStatus::from_code(code).expect("valid status code")
}

/// Build the scene for `seed`. Identical seeds give identical scenes.
pub fn synthetic_scene(seed: u64) -> Result<SyntheticScene, SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sidecar = Sidecar {
        epsg: 32610,
        transform: [SCENE_GSD_M, 0.0, 548000.0, 0.0, -SCENE_GSD_M, 4188000.0],
        width: SCENE_SIZE,
        height: SCENE_SIZE,
        timestamp: SCENE_TIME.into(),
        provider: Provider::Synthetic,
        gsd_m: SCENE_GSD_M,
        bands: None,
    };
    let georef = sidecar.georef();
    let t0 = sidecar.timestamp_epoch()?;

    let mut lengths = SHIP_LENGTHS_M;
    for i in (1..lengths.len()).rev() {
        lengths.swap(i, rng.random_range(0..=i));
    }
    let mut ships = Vec::new();
    for (i, &length_m) in lengths.iter().enumerate() {
        let (gx, gy) = (i % 4, i / 4);
        let cx = 250.0 + 500.0 * gx as f64 + rng.random_range(-60.0..60.0);
        let cy = 300.0 + 700.0 * gy as f64 + rng.random_range(-60.0..60.0);
        ships.push(SyntheticShip {
            mmsi: 366_000_100 + i as u32,
            pixel: (cx, cy),
            length_m,
            heading_deg: rng.random_range(0.0..180.0),
            clouded: i < 2,
        });
    }
    let cloud = (100, 900, 150, 450);

    let n = SCENE_SIZE as usize;
    let mut data: Vec<u16> = (0..n * n).map(|_| 30 + rng.random_range(0..20u16)).collect();
    for s in &ships {
        let len_px = s.length_m / SCENE_GSD_M;
        let beam_px = (len_px / 7.0).max(3.0);
        let r = len_px / 2.0 + 1.0;
        let (x0, x1) = ((s.pixel.0 - r).floor().max(0.0) as usize, ((s.pixel.0 + r).ceil() as usize).min(n));
        let (y0, y1) = ((s.pixel.1 - r).floor().max(0.0) as usize, ((s.pixel.1 + r).ceil() as usize).min(n));
        for y in y0..y1 {
            for x in x0..x1 {
                if in_hull(x as f64 + 0.5, y as f64 + 0.5, s, len_px, beam_px) {
                    data[y * n + x] = 210 + rng.random_range(0..20u16);
                }
            }
        }
    }
    let mut mask = BinaryMask::new(SCENE_SIZE, SCENE_SIZE);
    mask.fill_rect(cloud.0, cloud.2, cloud.1, cloud.3);
    for y in cloud.2 as usize..cloud.3 as usize {
        for x in cloud.0 as usize..cloud.1 as usize {
            data[y * n + x] = (data[y * n + x] + 90).min(255);
        }
    }
    let pixels = Pixels::from_data(SCENE_SIZE, SCENE_SIZE, 1, SampleDepth::Eight, data).expect("8-bit samples");
    let bundle = RasterBundle::new("synthetic-sf", pixels, sidecar, Some(mask))?;

    let mut records = Vec::new();
    let mut report = |mmsi: u32, t: i64, col: f64, row: f64, code: u8, length: f64| -> Result<(), SynthError> {
        let (lat, lon) = pixel_to_geo(&georef, col, row)?;
        let mut r = AisRecord::new(mmsi, t, lat, lon, status(code));
        r.length_m = Some(length);
        r.sog = Some(if code == UNDER_WAY { 8.0 } else { 0.0 });
        records.push(r);
        Ok(())
    };
    for s in &ships {
        for k in -2..=2i64 {
            let jx = rng.random_range(-0.1..0.1);
            let jy = rng.random_range(-0.1..0.1);
            report(s.mmsi, t0 + 60 * k, s.pixel.0 + jx, s.pixel.1 + jy, MOORED, s.length_m)?;
        }
    }
    for k in -2..=2i64 {
        // moving through the scene
        report(366_000_901, t0 + 60 * k, 1000.0 + 40.0 * k as f64, 650.0, UNDER_WAY, 120.0)?;
        // moored, but only reporting an hour away from capture
        report(366_000_902, t0 + 3600 + 60 * k, 1500.0, 650.0, MOORED, 150.0)?;
        // status flips inside the window
        let code = if k < 0 { UNDER_WAY } else { MOORED };
        report(366_000_903, t0 + 60 * k, 500.0, 1350.0, code, 140.0)?;
        // too short to count
        report(366_000_904, t0 + 60 * k, 1000.0, 1350.0, MOORED, 20.0)?;
    }
    records.sort_by_key(|r| (r.timestamp, r.mmsi));
    Ok(SyntheticScene { bundle, ships, records, cloud })
}

impl SyntheticScene {
    /// Write image, sidecar and mask under the catalog layout, and the AIS
    /// stream to `ais/records.jsonl`.
    pub fn write_to(&self, root: &Path, location: &str, year: &str) -> Result<(), SynthError> {
        let dir = image_dir(root, Provider::Synthetic, location, year);
        fs::create_dir_all(&dir)?;
        let id = self.bundle.id();
        fs::write(dir.join(format!("{id}.png")), self.bundle.pixels().encode_png())?;
        let sidecar = serde_json::to_string_pretty(self.bundle.sidecar()).expect("sidecar serializes");
        fs::write(dir.join(format!("{id}.json")), sidecar)?;
        if let Some(m) = self.bundle.cloud_mask() {
            fs::write(dir.join(format!("{id}.mask.png")), m.to_pixels().encode_png())?;
        }
        let ais = root.join("ais");
        fs::create_dir_all(&ais)?;
        let mut buf = Vec::new();
        jsonl::write_lines(&mut buf, &self.records)?;
        fs::write(ais.join("records.jsonl"), buf)?;
        Ok(())
    }
}
