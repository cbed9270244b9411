use super::{DetectError, Detection, Space};
use crate::geom::PixelBox;
use crate::raster::Tile;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExternalParams {
    pub exchange_dir: PathBuf,
    /// Shell command run once per request; `{request_dir}` is substituted.
    /// Without a command the directory is polled for `response.json`.
    #[serde(default)]
    pub command: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
}

fn default_timeout() -> f64 {
    600.0
}

/// One entry of `request.json`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileRequest {
    pub id: String,
    pub path: String,
    pub width: u32,
    pub height: u32,
    pub parent_id: String,
    pub origin: (u32, u32),
}

#[derive(Serialize)]
struct Request<'a> {
    tiles: &'a [TileRequest],
}

struct DirLock(PathBuf);

impl DirLock {
    fn acquire(dir: &Path) -> Result<DirLock, DetectError> {
        let path = dir.join(".lock");
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(DirLock(path)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(DetectError::Busy(dir.to_path_buf())),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

fn protocol(record: impl Into<String>, reason: impl Into<String>) -> DetectError {
    DetectError::Protocol { record: record.into(), reason: reason.into() }
}

/// Parse and validate a `response.json` body. Tiles absent from the response
/// have no detections; ids not in `known` are rejected.
pub fn parse_response(text: &str, known: &BTreeSet<String>) -> Result<BTreeMap<String, Vec<Detection>>, DetectError> {
    if text.trim().is_empty() {
        return Ok(BTreeMap::new());
    }
    let root: Value = serde_json::from_str(text).map_err(|e| protocol("response.json", e.to_string()))?;
    let obj = root.as_object().ok_or_else(|| protocol("response.json", "top level must be an object"))?;
    let mut out = BTreeMap::new();
    for (tile_id, list) in obj {
        if !known.contains(tile_id) {
            return Err(protocol(tile_id.clone(), "unknown tile id"));
        }
        let items = list.as_array().ok_or_else(|| protocol(tile_id.clone(), "detections must be an array"))?;
        let mut dets = Vec::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            let rec = format!("{tile_id}[{i}]");
            let b = item
                .get("box")
                .and_then(Value::as_array)
                .filter(|a| a.len() == 4)
                .ok_or_else(|| protocol(rec.clone(), "box must be an array of 4 numbers"))?;
            let mut v = [0.0; 4];
            for (k, x) in b.iter().enumerate() {
                v[k] = x.as_f64().ok_or_else(|| protocol(rec.clone(), "box must be an array of 4 numbers"))?;
            }
            let confidence = item
                .get("confidence")
                .and_then(Value::as_f64)
                .ok_or_else(|| protocol(rec.clone(), "missing numeric confidence"))?;
            let d = Detection { bbox: PixelBox::from(v), confidence, space: Space::Tile { origin: (0, 0) } };
            if !d.bbox.is_valid() {
                return Err(protocol(rec, format!("degenerate box {v:?}")));
            }
            if !(0.0..=1.0).contains(&confidence) {
                return Err(protocol(rec, format!("confidence {confidence} outside [0, 1]")));
            }
            dets.push(d);
        }
        out.insert(tile_id.clone(), dets);
    }
    Ok(out)
}

fn file_name(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect::<String>()
        + ".png"
}

/// Hand tiles to an external detector through the exchange directory and
/// collect its answers keyed by tile id.
pub fn run_external(tiles: &[Tile], params: &ExternalParams) -> Result<BTreeMap<String, Vec<Detection>>, DetectError> {
    let dir = &params.exchange_dir;
    fs::create_dir_all(dir)?;
    let _lock = DirLock::acquire(dir)?;
    let response = dir.join("response.json");
    if response.exists() {
        fs::remove_file(&response)?;
    }
    let tile_dir = dir.join("tiles");
    if tile_dir.exists() {
        fs::remove_dir_all(&tile_dir)?;
    }
    fs::create_dir_all(&tile_dir)?;

    let mut requests = Vec::with_capacity(tiles.len());
    for t in tiles {
        let rel = format!("tiles/{}", file_name(&t.id()));
        fs::write(dir.join(&rel), t.pixels.encode_png())?;
        requests.push(TileRequest {
            id: t.id(),
            path: rel,
            width: t.pixels.width(),
            height: t.pixels.height(),
            parent_id: t.parent_id.clone(),
            origin: t.origin,
        });
    }
    let body = serde_json::to_vec_pretty(&Request { tiles: &requests }).map_err(|e| DetectError::Io(e.to_string()))?;
    fs::write(dir.join("request.json"), body)?;
    let known: BTreeSet<String> = requests.iter().map(|r| r.id.clone()).collect();

    let timeout = Duration::from_secs_f64(params.timeout_s);
    let started = Instant::now();
    if let Some(cmd) = &params.command {
        let line = cmd.replace("{request_dir}", &dir.to_string_lossy());
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&line)
            .stdin(Stdio::null())
            .spawn()?;
        loop {
            if let Some(status) = child.try_wait()? {
                if !status.success() {
                    return Err(DetectError::ExternalFailed(format!("`{line}` exited with {status}")));
                }
                break;
            }
            if started.elapsed() >= timeout {
                let _ = child.kill();
                let _ = child.wait();
                return Err(DetectError::ExternalTimeout(params.timeout_s));
            }
            std::thread::sleep(Duration::from_millis(20));
        }
        let text = fs::read_to_string(&response)
            .map_err(|e| protocol("response.json", format!("not written: {e}")))?;
        return parse_response(&text, &known);
    }
    loop {
        if let Ok(text) = fs::read_to_string(&response) {
            match parse_response(&text, &known) {
                Ok(r) => return Ok(r),
                // a half-written file parses as truncated JSON; wait for the rest
                Err(DetectError::Protocol { reason, .. }) if reason.contains("EOF") && started.elapsed() < timeout => {}
                Err(e) => return Err(e),
            }
        }
        if started.elapsed() >= timeout {
            return Err(DetectError::ExternalTimeout(params.timeout_s));
        }
        std::thread::sleep(Duration::from_millis(50));
    }
}
