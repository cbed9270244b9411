use super::curation::{EffectiveView, PatchState};
use super::{io_err, CatalogError, DatasetManifest, ImageEntry, ManifestStats, PatchEntry};
use crate::correlate::AnnotationBox;
use crate::jsonl;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

/// Which patches enter an export.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportPolicy {
    /// Accepted patches only.
    Strict,
    /// Everything not rejected.
    #[default]
    Lenient,
}

impl std::str::FromStr for ExportPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strict" => Ok(ExportPolicy::Strict),
            "lenient" => Ok(ExportPolicy::Lenient),
            other => Err(format!("unknown export policy {other:?}")),
        }
    }
}

impl ExportPolicy {
    pub fn admits(self, state: PatchState) -> bool {
        match self {
            ExportPolicy::Strict => state == PatchState::Accepted,
            ExportPolicy::Lenient => state != PatchState::Rejected,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    /// Patch PNGs plus one JSON line per annotation.
    #[default]
    Jsonl,
}

/// One line of the exported `annotations.jsonl`, in patch coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExportRecord {
    pub patch_id: String,
    #[serde(flatten)]
    pub annotation: AnnotationBox,
}

/// Frozen `manifest.json` of an export.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExportSnapshot {
    pub policy: ExportPolicy,
    pub format: ExportFormat,
    pub images: Vec<ImageEntry>,
    pub patches: Vec<PatchEntry>,
    pub stats: ManifestStats,
    /// SHA-256 of every other exported file, keyed by relative path.
    pub files: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExportSummary {
    pub out_dir: PathBuf,
    pub patches: usize,
    pub annotations: usize,
    pub files: BTreeMap<String, String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_hashed(dir: &Path, rel: &str, bytes: &[u8], files: &mut BTreeMap<String, String>) -> Result<(), CatalogError> {
    let path = dir.join(rel);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(&path, bytes).map_err(io_err(&path))?;
    files.insert(rel.to_string(), sha256_hex(bytes));
    Ok(())
}

fn export_into(
    root: &Path,
    manifest: &DatasetManifest,
    view: &EffectiveView,
    policy: ExportPolicy,
    format: ExportFormat,
    dir: &Path,
) -> Result<ExportSummary, CatalogError> {
    let mut files = BTreeMap::new();
    let mut patches = Vec::new();
    let mut records = Vec::new();
    for p in &manifest.patches {
        if !policy.admits(view.patch_state(&p.patch_id)) {
            continue;
        }
        let src = root.join(&p.path);
        let bytes = fs::read(&src).map_err(io_err(&src))?;
        let rel = format!("patches/{}/{}_{}.png", p.image_id, p.origin.0, p.origin.1);
        write_hashed(dir, &rel, &bytes, &mut files)?;
        records.extend(view.kept_annotations(manifest, &p.patch_id).into_iter().map(|annotation| ExportRecord {
            patch_id: p.patch_id.clone(),
            annotation,
        }));
        patches.push(PatchEntry { path: rel, ..p.clone() });
    }
    let mut buf = Vec::new();
    jsonl::write_lines(&mut buf, &records).map_err(io_err(dir))?;
    write_hashed(dir, "annotations.jsonl", &buf, &mut files)?;

    let used: BTreeSet<&str> = patches.iter().map(|p| p.image_id.as_str()).collect();
    let mut sub = view.effective_manifest(manifest);
    sub.images.retain(|i| used.contains(i.image_id.as_str()));
    sub.image_annotations.retain(|k, _| used.contains(k.as_str()));
    let kept: BTreeSet<&str> = patches.iter().map(|p| p.patch_id.as_str()).collect();
    sub.patches.retain(|p| kept.contains(p.patch_id.as_str()));
    sub.annotations.retain(|k, _| kept.contains(k.as_str()));
    let stats = sub.compute_stats(super::curation::keeps);
    let snapshot = ExportSnapshot {
        policy,
        format,
        images: sub.images,
        patches: patches.clone(),
        stats,
        files: files.clone(),
    };
    let text = serde_json::to_string_pretty(&snapshot).expect("snapshot serializes") + "\n";
    let path = dir.join("manifest.json");
    fs::write(&path, &text).map_err(io_err(&path))?;
    files.insert("manifest.json".into(), sha256_hex(text.as_bytes()));
    Ok(ExportSummary {
        out_dir: dir.to_path_buf(),
        patches: patches.len(),
        annotations: records.len(),
        files,
    })
}

/// Write an export bundle to `out_dir`. The bundle is assembled in a sibling
/// staging directory and renamed into place; on failure nothing is left behind.
pub fn export(
    root: &Path,
    manifest: &DatasetManifest,
    view: &EffectiveView,
    policy: ExportPolicy,
    format: ExportFormat,
    out_dir: &Path,
) -> Result<ExportSummary, CatalogError> {
    let name = out_dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "export".into());
    let parent = out_dir.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(parent).map_err(io_err(parent))?;
    let staging = parent.join(format!(".{name}.partial"));
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(io_err(&staging))?;
    }
    fs::create_dir_all(&staging).map_err(io_err(&staging))?;
    let result = export_into(root, manifest, view, policy, format, &staging).and_then(|mut summary| {
        if out_dir.exists() {
            fs::remove_dir_all(out_dir).map_err(io_err(out_dir))?;
        }
        fs::rename(&staging, out_dir).map_err(io_err(out_dir))?;
        summary.out_dir = out_dir.to_path_buf();
        Ok(summary)
    });
    if result.is_err() {
        let _ = fs::remove_dir_all(&staging);
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{apply_curation, build_manifest, Action, CurationDecision, Target};
    use chrono::DateTime;

    fn dataset() -> (tempfile::TempDir, DatasetManifest) {
        let dir = tempfile::tempdir().unwrap();
        let origins: Vec<(u32, u32)> = (0..10).map(|i| (i * 100, 0)).collect();
        crate::catalog::tests::fixture(dir.path(), &[("a", "SF")], &origins);
        let m = build_manifest(dir.path()).unwrap();
        (dir, m)
    }

    fn decide(pid: &str, action: Action, at: i64) -> CurationDecision {
        CurationDecision {
            patch_id: pid.into(),
            target: Target::Patch,
            action,
            actor: "t".into(),
            at: DateTime::from_timestamp(at, 0).unwrap(),
            seq: 0,
        }
    }

    #[test]
    fn strict_and_lenient_counts() {
        let (dir, m) = dataset();
        let mut log = Vec::new();
        for (i, p) in m.patches.iter().enumerate() {
            log.push(decide(&p.patch_id, if i < 3 { Action::Reject } else { Action::Accept }, i as i64));
        }
        let v = apply_curation(&m, &log);
        let out = dir.path().join("out/strict");
        let s = export(dir.path(), &m, &v, ExportPolicy::Strict, ExportFormat::Jsonl, &out).unwrap();
        assert_eq!(s.patches, 7);
        let none = apply_curation(&m, &[]);
        let l = export(dir.path(), &m, &none, ExportPolicy::Lenient, ExportFormat::Jsonl, &dir.path().join("out/lenient")).unwrap();
        assert_eq!(l.patches, 10);
        let empty = export(dir.path(), &m, &none, ExportPolicy::Strict, ExportFormat::Jsonl, &dir.path().join("out/e")).unwrap();
        assert_eq!(empty.patches, 0);
        assert!(!dir.path().join("out/.strict.partial").exists());
    }

    #[test]
    fn repeat_export_is_byte_identical() {
        let (dir, m) = dataset();
        let v = apply_curation(&m, &[decide("a@0_0", Action::Reject, 1)]);
        let a = export(dir.path(), &m, &v, ExportPolicy::Lenient, ExportFormat::Jsonl, &dir.path().join("x")).unwrap();
        let snap_a = fs::read(dir.path().join("x/manifest.json")).unwrap();
        let b = export(dir.path(), &m, &v, ExportPolicy::Lenient, ExportFormat::Jsonl, &dir.path().join("x")).unwrap();
        assert_eq!(a.files, b.files);
        assert_eq!(snap_a, fs::read(dir.path().join("x/manifest.json")).unwrap());
        let snap: ExportSnapshot = serde_json::from_slice(&snap_a).unwrap();
        assert_eq!(snap.patches.len(), 9);
        assert_eq!(snap.files.len(), 10);
    }

    #[test]
    fn failed_export_leaves_nothing() {
        let (dir, mut m) = dataset();
        m.patches[0].path = "patches/a/missing.png".into();
        let out = dir.path().join("bad");
        assert!(export(dir.path(), &m, &EffectiveView::default(), ExportPolicy::Lenient, ExportFormat::Jsonl, &out).is_err());
        assert!(!out.exists());
        assert!(!dir.path().join(".bad.partial").exists());
    }
}
