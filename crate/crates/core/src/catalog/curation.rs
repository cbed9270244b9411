use super::{io_err, CatalogError, DatasetManifest, ManifestStats};
use crate::correlate::{AnnotationBox, Curation};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Accept,
    Reject,
}

/// What a decision applies to: a whole patch or one annotation id.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum Target {
    Patch,
    Annotation(String),
}

impl From<String> for Target {
    fn from(s: String) -> Self {
        if s == "patch" {
            Target::Patch
        } else {
            Target::Annotation(s)
        }
    }
}

impl From<Target> for String {
    fn from(t: Target) -> String {
        match t {
            Target::Patch => "patch".into(),
            Target::Annotation(a) => a,
        }
    }
}

/// One line of the append-only curation log.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurationDecision {
    pub patch_id: String,
    pub target: Target,
    pub action: Action,
    pub actor: String,
    pub at: DateTime<Utc>,
    /// Position in the log; breaks timestamp ties.
    #[serde(skip)]
    pub seq: u64,
}

fn parse_lines(bytes: &[u8]) -> Result<(Vec<CurationDecision>, usize), CatalogError> {
    let mut out = Vec::new();
    let complete = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    for (i, line) in bytes[..complete].split(|&b| b == b'\n').enumerate() {
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        let mut d: CurationDecision = serde_json::from_slice(line).map_err(|e| CatalogError::Log {
            line: i + 1,
            reason: e.to_string(),
        })?;
        d.seq = out.len() as u64;
        out.push(d);
    }
    let tail = &bytes[complete..];
    if !tail.iter().all(u8::is_ascii_whitespace) {
        match serde_json::from_slice::<CurationDecision>(tail) {
            Ok(mut d) => {
                d.seq = out.len() as u64;
                out.push(d);
                return Ok((out, bytes.len()));
            }
            Err(_) => log::warn!("ignoring partially written last curation line"),
        }
    }
    Ok((out, complete))
}

/// Decode log bytes, ignoring a torn final line.
pub fn parse_log(bytes: &[u8]) -> Result<Vec<CurationDecision>, CatalogError> {
    parse_lines(bytes).map(|r| r.0)
}

/// Read every complete decision; a torn final line is ignored.
pub fn read_log(path: &Path) -> Result<Vec<CurationDecision>, CatalogError> {
    match fs::read(path) {
        Ok(bytes) => parse_log(&bytes),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
        Err(e) => Err(io_err(path)(e)),
    }
}

/// Single writer for the curation log.
#[derive(Debug)]
pub struct CurationLog {
    path: PathBuf,
    file: File,
    decisions: Vec<CurationDecision>,
}

impl CurationLog {
    /// Open (creating if needed) and drop any torn final line.
    pub fn open(path: &Path) -> Result<CurationLog, CatalogError> {
        let bytes = match fs::read(path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(io_err(path)(e)),
        };
        let (decisions, valid_len) = parse_lines(&bytes)?;
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(io_err(path))?;
        if valid_len < bytes.len() {
            file.set_len(valid_len as u64).map_err(io_err(path))?;
        } else if valid_len > 0 && bytes[valid_len - 1] != b'\n' {
            (&file).write_all(b"\n").map_err(io_err(path))?;
        }
        Ok(CurationLog { path: path.to_path_buf(), file, decisions })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn decisions(&self) -> &[CurationDecision] {
        &self.decisions
    }

    /// Append and flush one decision; returns it with its sequence number.
    pub fn append(&mut self, mut d: CurationDecision) -> Result<CurationDecision, CatalogError> {
        d.seq = self.decisions.len() as u64;
        let mut line = serde_json::to_vec(&d).expect("decision serializes");
        line.push(b'\n');
        self.file.write_all(&line).map_err(io_err(&self.path))?;
        self.file.sync_data().map_err(io_err(&self.path))?;
        self.decisions.push(d.clone());
        Ok(d)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatchState {
    #[default]
    Undecided,
    Accepted,
    Rejected,
}

/// Last-writer-wins state of every decided patch and annotation.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EffectiveView {
    pub patches: BTreeMap<String, PatchState>,
    pub annotations: BTreeMap<String, Curation>,
    /// Decisions naming targets the manifest does not know.
    pub skipped: usize,
}

/// Replay decisions ordered by `(at, seq)`.
pub fn apply_curation(manifest: &DatasetManifest, decisions: &[CurationDecision]) -> EffectiveView {
    let patch_ids: BTreeSet<&str> = manifest.patches.iter().map(|p| p.patch_id.as_str()).collect();
    let ann_ids: BTreeSet<String> = manifest.image_annotations.values().flatten().map(|a| a.annotation_id()).collect();
    let mut ordered: Vec<&CurationDecision> = decisions.iter().collect();
    ordered.sort_by_key(|d| (d.at, d.seq));
    let mut view = EffectiveView::default();
    for d in ordered {
        match &d.target {
            Target::Patch if patch_ids.contains(d.patch_id.as_str()) => {
                let s = match d.action {
                    Action::Accept => PatchState::Accepted,
                    Action::Reject => PatchState::Rejected,
                };
                view.patches.insert(d.patch_id.clone(), s);
            }
            Target::Annotation(id) if ann_ids.contains(id) => {
                let c = match d.action {
                    Action::Accept => Curation::Accepted,
                    Action::Reject => Curation::Rejected,
                };
                view.annotations.insert(id.clone(), c);
            }
            other => {
                log::warn!("skipping decision for unknown target {other:?} on patch {}", d.patch_id);
                view.skipped += 1;
            }
        }
    }
    view
}

/// Counted as a valid ship after curation.
pub fn keeps(a: &AnnotationBox) -> bool {
    match a.curation {
        Curation::Accepted => true,
        Curation::Rejected => false,
        Curation::Auto => !a.flagged,
    }
}

impl EffectiveView {
    pub fn patch_state(&self, patch_id: &str) -> PatchState {
        self.patches.get(patch_id).copied().unwrap_or_default()
    }

    pub fn annotation_state(&self, annotation_id: &str) -> Curation {
        self.annotations.get(annotation_id).copied().unwrap_or_default()
    }

    /// Patch annotations with their effective curation; every box of a
    /// rejected patch reads as rejected.
    pub fn patch_annotations(&self, manifest: &DatasetManifest, patch_id: &str) -> Vec<AnnotationBox> {
        let rejected = self.patch_state(patch_id) == PatchState::Rejected;
        manifest
            .annotations
            .get(patch_id)
            .map(|v| {
                v.iter()
                    .map(|a| {
                        let mut a = a.clone();
                        a.curation = if rejected { Curation::Rejected } else { self.annotation_state(&a.annotation_id()) };
                        a
                    })
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Annotations that survive curation: not rejected, and not cloud-flagged
    /// unless explicitly accepted.
    pub fn kept_annotations(&self, manifest: &DatasetManifest, patch_id: &str) -> Vec<AnnotationBox> {
        self.patch_annotations(manifest, patch_id).into_iter().filter(keeps).collect()
    }

    /// Manifest copy with curation states written into every annotation.
    pub fn effective_manifest(&self, manifest: &DatasetManifest) -> DatasetManifest {
        let mut m = manifest.clone();
        for anns in m.image_annotations.values_mut() {
            for a in anns.iter_mut() {
                a.curation = self.annotation_state(&a.annotation_id());
            }
        }
        let pids: Vec<String> = m.annotations.keys().cloned().collect();
        for pid in pids {
            let v = self.patch_annotations(manifest, &pid);
            m.annotations.insert(pid, v);
        }
        m.stats = m.compute_stats(keeps);
        m
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateCounts {
    pub patches: usize,
    pub undecided: usize,
    pub accepted: usize,
    pub rejected: usize,
    /// Patches holding at least one cloud-flagged annotation.
    pub flagged: usize,
}

impl StateCounts {
    fn add(&mut self, state: PatchState, flagged: bool) {
        self.patches += 1;
        match state {
            PatchState::Undecided => self.undecided += 1,
            PatchState::Accepted => self.accepted += 1,
            PatchState::Rejected => self.rejected += 1,
        }
        self.flagged += flagged as usize;
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurationStats {
    #[serde(flatten)]
    pub total: StateCounts,
    /// Keyed by `provider/location/year`.
    pub groups: BTreeMap<String, StateCounts>,
    /// Image/ship/patch tables after curation.
    pub tables: ManifestStats,
}

pub fn curation_stats(manifest: &DatasetManifest, view: &EffectiveView) -> CurationStats {
    let mut out = CurationStats::default();
    for p in &manifest.patches {
        let state = view.patch_state(&p.patch_id);
        let flagged = manifest.annotations.get(&p.patch_id).is_some_and(|v| v.iter().any(|a| a.flagged));
        out.total.add(state, flagged);
        if let Some(img) = manifest.image(&p.image_id) {
            out.groups.entry(img.group().to_string()).or_default().add(state, flagged);
        }
    }
    out.tables = view.effective_manifest(manifest).stats;
    out
}
