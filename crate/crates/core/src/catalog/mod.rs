//! On-disk dataset catalog: directory layout, manifest, curation log and
//! deterministic export.
//!
//! ```text
//! images/<provider>/<location>/<year>/<image_id>.{png,json,mask.png}
//! patches/<image_id>/<x0>_<y0>.png
//! annotations/<image_id>.jsonl
//! curation.jsonl
//! manifest.json
//! ```

mod config;
mod curation;
mod export;

pub use config::{AirbusSection, Config, DetectSection, ExportSection, RasterSection, ReviewSection, TilingSection};
pub use curation::{
    apply_curation, curation_stats, parse_log, read_log, Action, CurationDecision, CurationLog, CurationStats,
    keeps, EffectiveView, PatchState, Target, StateCounts,
};
pub use export::{export, ExportFormat, ExportPolicy, ExportRecord, ExportSnapshot, ExportSummary};

use crate::correlate::AnnotationBox;
use crate::geo::GeoRef;
use crate::jsonl;
use crate::raster::{clip_boxes_to_window, Provider, Sidecar, Tile};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CURATION_FILE: &str = "curation.jsonl";

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("dataset integrity: {}", .0.join("; "))]
    Integrity(Vec<String>),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Parse { path: PathBuf, reason: String },
    #[error("curation log line {line}: {reason}")]
    Log { line: usize, reason: String },
    #[error("config: {0}")]
    Config(String),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CatalogError + '_ {
    move |source| CatalogError::Io { path: path.to_path_buf(), source }
}

/// One source image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageEntry {
    pub image_id: String,
    pub provider: Provider,
    pub location: String,
    pub year: String,
    /// Paths relative to the dataset root.
    pub image_path: String,
    pub sidecar_path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_path: Option<String>,
    pub width: u32,
    pub height: u32,
    pub georef: GeoRef,
    pub gsd_m: f64,
    pub timestamp: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bands: Option<Vec<String>>,
}

impl ImageEntry {
    pub fn group(&self) -> GroupKey {
        GroupKey {
            provider: self.provider.to_string(),
            location: self.location.clone(),
            year: self.year.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchEntry {
    pub patch_id: String,
    pub image_id: String,
    pub origin: (u32, u32),
    pub size: u32,
    pub path: String,
}

/// Grouping used by the statistics tables.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupKey {
    pub provider: String,
    pub location: String,
    pub year: String,
}

impl std::fmt::Display for GroupKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}/{}", self.provider, self.location, self.year)
    }
}

/// Counts in the shape of the dataset tables: images and ships, images with
/// at least one valid match, patches and ships inside patches.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupStats {
    pub images: usize,
    pub images_with_ships: usize,
    pub ships: usize,
    pub patches: usize,
    pub patches_with_ships: usize,
    pub patch_ships: usize,
}

impl GroupStats {
    fn add(&mut self, o: &GroupStats) {
        self.images += o.images;
        self.images_with_ships += o.images_with_ships;
        self.ships += o.ships;
        self.patches += o.patches;
        self.patches_with_ships += o.patches_with_ships;
        self.patch_ships += o.patch_ships;
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestStats {
    pub total: GroupStats,
    /// Keyed by `provider/location/year`.
    pub groups: BTreeMap<String, GroupStats>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub images: Vec<ImageEntry>,
    pub patches: Vec<PatchEntry>,
    /// Image-space annotations per image.
    pub image_annotations: BTreeMap<String, Vec<AnnotationBox>>,
    /// Patch-space annotations per patch.
    pub annotations: BTreeMap<String, Vec<AnnotationBox>>,
    pub stats: ManifestStats,
}

/// Ships that count as valid matches: not cloud-flagged and not rejected.
fn is_valid(a: &AnnotationBox) -> bool {
    !a.flagged && a.curation != crate::correlate::Curation::Rejected
}

impl DatasetManifest {
    pub fn image(&self, image_id: &str) -> Option<&ImageEntry> {
        self.images.iter().find(|i| i.image_id == image_id)
    }

    pub fn patch(&self, patch_id: &str) -> Option<&PatchEntry> {
        self.patches.iter().find(|p| p.patch_id == patch_id)
    }

    /// Check the reference invariants.
    pub fn validate(&self) -> Result<(), CatalogError> {
        let mut problems = Vec::new();
        let mut ids = BTreeSet::new();
        for i in &self.images {
            if !ids.insert(i.image_id.as_str()) {
                problems.push(format!("duplicate image id {}", i.image_id));
            }
        }
        let mut patch_ids = BTreeSet::new();
        for p in &self.patches {
            if !ids.contains(p.image_id.as_str()) {
                problems.push(format!("patch {} references missing image {}", p.patch_id, p.image_id));
            }
            if !patch_ids.insert(p.patch_id.as_str()) {
                problems.push(format!("duplicate patch id {}", p.patch_id));
            }
        }
        for (pid, anns) in &self.annotations {
            if !patch_ids.contains(pid.as_str()) {
                problems.push(format!("annotations reference missing patch {pid}"));
            }
            for a in anns {
                if let Err(e) = a.check() {
                    problems.push(format!("patch {pid}: {e}"));
                }
            }
        }
        for (iid, anns) in &self.image_annotations {
            if !ids.contains(iid.as_str()) {
                problems.push(format!("annotations reference missing image {iid}"));
            }
            for a in anns.iter().filter(|a| &a.image_id != iid) {
                problems.push(format!("annotation {} filed under image {iid}", a.annotation_id()));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(CatalogError::Integrity(problems))
        }
    }

    /// Derive the patch-level annotation lists and the statistics.
    pub fn refresh(&mut self) {
        self.images.sort_by(|a, b| a.image_id.cmp(&b.image_id));
        self.patches.sort_by(|a, b| {
            (a.image_id.as_str(), a.origin.1, a.origin.0).cmp(&(b.image_id.as_str(), b.origin.1, b.origin.0))
        });
        self.annotations.clear();
        for p in &self.patches {
            let boxes = self.image_annotations.get(&p.image_id).map(Vec::as_slice).unwrap_or(&[]);
            let clipped = clip_boxes_to_window(p.origin, p.size, boxes);
            if !clipped.is_empty() {
                self.annotations.insert(p.patch_id.clone(), clipped);
            }
        }
        self.stats = self.compute_stats(is_valid);
    }

    /// Table-style counts, counting only annotations accepted by `valid`.
    pub fn compute_stats(&self, valid: impl Fn(&AnnotationBox) -> bool) -> ManifestStats {
        let mut groups: BTreeMap<String, GroupStats> = BTreeMap::new();
        for img in &self.images {
            let g = groups.entry(img.group().to_string()).or_default();
            let ships = self
                .image_annotations
                .get(&img.image_id)
                .map_or(0, |v| v.iter().filter(|a| valid(a)).count());
            g.images += 1;
            g.ships += ships;
            g.images_with_ships += (ships > 0) as usize;
        }
        for p in &self.patches {
            let Some(img) = self.image(&p.image_id) else { continue };
            let g = groups.entry(img.group().to_string()).or_default();
            let ships = self.annotations.get(&p.patch_id).map_or(0, |v| v.iter().filter(|a| valid(a)).count());
            g.patches += 1;
            g.patch_ships += ships;
            g.patches_with_ships += (ships > 0) as usize;
        }
        let mut total = GroupStats::default();
        for g in groups.values() {
            total.add(g);
        }
        ManifestStats { total, groups }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<DatasetManifest, CatalogError> {
        let m: DatasetManifest = serde_json::from_str(text).map_err(|e| CatalogError::Parse {
            path: PathBuf::from(MANIFEST_FILE),
            reason: e.to_string(),
        })?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, root: &Path) -> Result<(), CatalogError> {
        let path = root.join(MANIFEST_FILE);
        fs::write(&path, self.to_json()).map_err(io_err(&path))
    }
}

pub fn patch_id(image_id: &str, origin: (u32, u32)) -> String {
    format!("{image_id}@{}_{}", origin.0, origin.1)
}

fn rel(root: &Path, p: &Path) -> String {
    p.strip_prefix(root).unwrap_or(p).to_string_lossy().replace('\\', "/")
}

fn sorted_dir(path: &Path) -> Result<Vec<PathBuf>, CatalogError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut v: Vec<PathBuf> = fs::read_dir(path)
        .map_err(io_err(path))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    v.sort();
    Ok(v)
}

fn read_annotations(path: &Path) -> Result<Vec<AnnotationBox>, CatalogError> {
    let f = fs::File::open(path).map_err(io_err(path))?;
    jsonl::read_lines(BufReader::new(f)).map_err(|e| CatalogError::Parse { path: path.to_path_buf(), reason: e.to_string() })
}

/// Directory that holds an image and its sidecar.
pub fn image_dir(root: &Path, provider: Provider, location: &str, year: &str) -> PathBuf {
    root.join("images").join(provider.as_str()).join(location).join(year)
}

/// Scan a dataset root into a validated manifest.
pub fn build_manifest(root: &Path) -> Result<DatasetManifest, CatalogError> {
    let mut m = DatasetManifest::default();
    let mut problems = Vec::new();
    for prov_dir in sorted_dir(&root.join("images"))? {
        let Some(provider) = prov_dir.file_name().and_then(|n| n.to_str()).and_then(|n| n.parse::<Provider>().ok()) else {
            problems.push(format!("unknown provider directory {}", rel(root, &prov_dir)));
            continue;
        };
        for loc_dir in sorted_dir(&prov_dir)?.into_iter().filter(|p| p.is_dir()) {
            for year_dir in sorted_dir(&loc_dir)?.into_iter().filter(|p| p.is_dir()) {
                for sidecar_path in sorted_dir(&year_dir)? {
                    let name = sidecar_path.file_name().and_then(|n| n.to_str()).unwrap_or("");
                    let Some(image_id) = name.strip_suffix(".json") else { continue };
                    let text = fs::read_to_string(&sidecar_path).map_err(io_err(&sidecar_path))?;
                    let sc = Sidecar::parse(&text).map_err(|e| CatalogError::Parse {
                        path: sidecar_path.clone(),
                        reason: e.to_string(),
                    })?;
                    let image_path = ["png", "tif", "tiff"]
                        .iter()
                        .map(|ext| year_dir.join(format!("{image_id}.{ext}")))
                        .find(|p| p.exists());
                    let Some(image_path) = image_path else {
                        problems.push(format!("sidecar {} has no image", rel(root, &sidecar_path)));
                        continue;
                    };
                    let mask = year_dir.join(format!("{image_id}.mask.png"));
                    m.images.push(ImageEntry {
                        image_id: image_id.to_string(),
                        provider,
                        location: loc_dir.file_name().unwrap_or_default().to_string_lossy().into_owned(),
                        year: year_dir.file_name().unwrap_or_default().to_string_lossy().into_owned(),
                        image_path: rel(root, &image_path),
                        sidecar_path: rel(root, &sidecar_path),
                        mask_path: mask.exists().then(|| rel(root, &mask)),
                        width: sc.width,
                        height: sc.height,
                        georef: sc.georef(),
                        gsd_m: sc.gsd_m,
                        timestamp: sc.timestamp.clone(),
                        bands: sc.bands.clone(),
                    });
                }
            }
        }
    }
    for path in sorted_dir(&root.join("annotations"))? {
        let Some(image_id) = path.file_name().and_then(|n| n.to_str()).and_then(|n| n.strip_suffix(".jsonl")) else {
            continue;
        };
        let anns = read_annotations(&path)?;
        m.image_annotations.insert(image_id.to_string(), anns);
    }
    for dir in sorted_dir(&root.join("patches"))?.into_iter().filter(|p| p.is_dir()) {
        let image_id = dir.file_name().unwrap_or_default().to_string_lossy().into_owned();
        for file in sorted_dir(&dir)? {
            let Some(stem) = file.file_name().and_then(|n| n.to_str()).and_then(|n| n.strip_suffix(".png")) else {
                continue;
            };
            let origin = stem
                .split_once('_')
                .and_then(|(x, y)| Some((x.parse::<u32>().ok()?, y.parse::<u32>().ok()?)));
            let Some(origin) = origin else {
                problems.push(format!("patch file {} is not named <x0>_<y0>.png", rel(root, &file)));
                continue;
            };
            let (w, h) = image::image_dimensions(&file).map_err(|e| CatalogError::Parse {
                path: file.clone(),
                reason: e.to_string(),
            })?;
            if w != h {
                problems.push(format!("patch {} is not square", rel(root, &file)));
            }
            m.patches.push(PatchEntry {
                patch_id: patch_id(&image_id, origin),
                image_id: image_id.clone(),
                origin,
                size: w,
                path: rel(root, &file),
            });
        }
    }
    if !problems.is_empty() {
        return Err(CatalogError::Integrity(problems));
    }
    m.validate()?;
    m.refresh();
    Ok(m)
}

/// Read `manifest.json` when present, otherwise scan the root.
pub fn load_manifest(root: &Path) -> Result<DatasetManifest, CatalogError> {
    let path = root.join(MANIFEST_FILE);
    match fs::read_to_string(&path) {
        Ok(text) => DatasetManifest::from_json(&text),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => build_manifest(root),
        Err(e) => Err(io_err(&path)(e)),
    }
}

/// Write the image-space annotation file of one image.
pub fn write_annotations(root: &Path, image_id: &str, boxes: &[AnnotationBox]) -> Result<PathBuf, CatalogError> {
    let dir = root.join("annotations");
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let path = dir.join(format!("{image_id}.jsonl"));
    let mut buf = Vec::new();
    jsonl::write_lines(&mut buf, boxes).map_err(io_err(&path))?;
    fs::write(&path, buf).map_err(io_err(&path))?;
    Ok(path)
}

/// Store a tile as a patch PNG.
pub fn write_patch(root: &Path, tile: &Tile) -> Result<PathBuf, CatalogError> {
    let dir = root.join("patches").join(&tile.parent_id);
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let path = dir.join(format!("{}_{}.png", tile.origin.0, tile.origin.1));
    fs::write(&path, tile.pixels.encode_png()).map_err(io_err(&path))?;
    Ok(path)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::geom::PixelBox;
    use crate::raster::{Pixels, SampleDepth};

    pub(crate) fn fixture(root: &Path, images: &[(&str, &str)], patch_origins: &[(u32, u32)]) {
        for (id, loc) in images {
            let dir = image_dir(root, Provider::Planet, loc, "2016");
            fs::create_dir_all(&dir).unwrap();
            let sc = Sidecar {
                epsg: 32610,
                transform: [3.0, 0.0, 560000.0, 0.0, -3.0, 4190000.0],
                width: 1400,
                height: 1400,
                timestamp: "2016-07-01T18:30:00Z".into(),
                provider: Provider::Planet,
                gsd_m: 3.0,
                bands: None,
            };
            fs::write(dir.join(format!("{id}.json")), serde_json::to_string(&sc).unwrap()).unwrap();
            fs::write(dir.join(format!("{id}.png")), b"not decoded by the catalog").unwrap();
            let pdir = root.join("patches").join(id);
            fs::create_dir_all(&pdir).unwrap();
            let png = Pixels::new(8, 8, 1, SampleDepth::Eight).encode_png();
            for (x, y) in patch_origins {
                fs::write(pdir.join(format!("{x}_{y}.png")), &png).unwrap();
            }
        }
    }

    #[test]
    fn empty_root() {
        let dir = tempfile::tempdir().unwrap();
        let m = build_manifest(dir.path()).unwrap();
        assert!(m.images.is_empty());
        assert_eq!(m.stats.total, GroupStats::default());
    }

    #[test]
    fn counts_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let origins: Vec<(u32, u32)> = (0..3).flat_map(|y| (0..3).map(move |x| (x * 3, y * 3))).collect();
        fixture(dir.path(), &[("a", "SF"), ("b", "LB")], &origins);
        let mut ann = AnnotationBox::auto("a", Some(1), PixelBox::new(1.0, 1.0, 2.0, 2.0), 40.0);
        write_annotations(dir.path(), "a", std::slice::from_ref(&ann)).unwrap();
        ann.mmsi = Some(2);
        ann.set_cloud_fraction(0.5);
        ann.bbox = PixelBox::new(7.0, 7.0, 7.5, 7.5);
        let mut anns = vec![ann.clone()];
        ann.mmsi = Some(3);
        ann.set_cloud_fraction(0.0);
        anns.push(ann);
        anns[0].image_id = "b".into();
        anns[1].image_id = "b".into();
        write_annotations(dir.path(), "b", &anns).unwrap();
        let m = build_manifest(dir.path()).unwrap();
        assert_eq!(m.stats.total.patches, 18);
        assert_eq!(m.stats.total.images, 2);
        assert_eq!(m.stats.total.ships, 2);
        assert_eq!(m.stats.total.images_with_ships, 2);
        assert_eq!(m.stats.groups["planet/SF/2016"].patches, 9);
        assert_eq!(m.annotations["a@0_0"][0].bbox, PixelBox::new(1.0, 1.0, 2.0, 2.0));
        assert_eq!(m.annotations["b@6_6"][0].bbox, PixelBox::new(1.0, 1.0, 1.5, 1.5));
        let back = DatasetManifest::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn dangling_patch_is_an_integrity_error() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path(), &[("a", "SF")], &[(0, 0)]);
        let ghost = dir.path().join("patches/ghost");
        fs::create_dir_all(&ghost).unwrap();
        fs::copy(dir.path().join("patches/a/0_0.png"), ghost.join("0_0.png")).unwrap();
        match build_manifest(dir.path()) {
            Err(CatalogError::Integrity(p)) => assert!(p[0].contains("ghost")),
            other => panic!("expected integrity error, got {other:?}"),
        }
    }
}
