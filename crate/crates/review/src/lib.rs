//! Curation service: a paged review queue, patch rendering with annotation
//! overlays, and accept/reject decisions appended to the catalog's curation log.

mod overlay;

pub use overlay::{draw_overlay, KEPT_COLOR, DROPPED_COLOR};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, Request, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use shipmatch_core::catalog::{
    apply_curation, curation_stats, load_manifest, Action, CatalogError, CurationDecision, CurationLog,
    CurationStats, DatasetManifest, EffectiveView, PatchEntry, PatchState, Target, CURATION_FILE,
};
use shipmatch_core::correlate::{AnnotationBox, Curation};
use shipmatch_core::raster::Provider;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use thiserror::Error;
use tokio::sync::{mpsc, oneshot};
use tower_http::services::ServeDir;

/// Header carrying the dataset revision on every response.
pub const REVISION_HEADER: &str = "x-dataset-revision";
pub const DEFAULT_PAGE_SIZE: usize = 50;

#[derive(Debug, Error)]
pub enum ReviewError {
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

/// Queue selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueueFilter {
    Undecided,
    Flagged,
    All,
}

impl std::str::FromStr for QueueFilter {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "undecided" => Ok(QueueFilter::Undecided),
            "flagged" => Ok(QueueFilter::Flagged),
            "all" => Ok(QueueFilter::All),
            other => Err(format!("unknown filter {other:?}; use undecided, flagged or all")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReviewAnnotation {
    pub annotation_id: String,
    #[serde(flatten)]
    pub annotation: AnnotationBox,
}

/// One patch as the reviewer sees it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReviewItem {
    pub patch_id: String,
    pub image_id: String,
    pub provider: Provider,
    pub location: String,
    pub year: String,
    pub origin: (u32, u32),
    pub size: u32,
    pub state: PatchState,
    /// At least one annotation is cloud-flagged.
    pub flagged: bool,
    pub annotations: Vec<ReviewAnnotation>,
    /// Index within the queue it was listed in.
    pub position: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueuePage {
    pub dataset_revision: u64,
    pub filter: QueueFilter,
    pub page: usize,
    pub page_size: usize,
    /// Items matching the filter across all pages.
    pub total: usize,
    pub items: Vec<ReviewItem>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionRequest {
    /// A patch id or an annotation id.
    pub target: String,
    pub action: Action,
    pub actor: String,
    /// Patch the annotation decision was made on; defaults to the first
    /// patch showing the annotation.
    #[serde(default)]
    pub patch_id: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionResponse {
    pub dataset_revision: u64,
    /// False when the decision repeated the current state and nothing was logged.
    pub appended: bool,
    pub target: Target,
    pub patch_id: String,
    pub patch_state: PatchState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotation_state: Option<Curation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub item: Option<ReviewItem>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsResponse {
    pub dataset_revision: u64,
    #[serde(flatten)]
    pub stats: CurationStats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub dataset_revision: u64,
    pub error: String,
}

#[derive(Debug)]
struct Snapshot {
    decisions: Vec<CurationDecision>,
    view: EffectiveView,
}

impl Snapshot {
    fn revision(&self) -> u64 {
        self.decisions.len() as u64
    }
}

struct WriteRequest {
    decision: CurationDecision,
    reply: oneshot::Sender<Result<bool, String>>,
}

struct Inner {
    root: PathBuf,
    manifest: Arc<DatasetManifest>,
    snapshot: Arc<RwLock<Snapshot>>,
    writer: Mutex<Option<mpsc::Sender<WriteRequest>>>,
    page_size: usize,
}

/// Handle to a running review service. Cheap to clone.
#[derive(Clone)]
pub struct ReviewService {
    inner: Arc<Inner>,
}

fn current_state(view: &EffectiveView, d: &CurationDecision) -> bool {
    match (&d.target, d.action) {
        (Target::Patch, Action::Accept) => view.patch_state(&d.patch_id) == PatchState::Accepted,
        (Target::Patch, Action::Reject) => view.patch_state(&d.patch_id) == PatchState::Rejected,
        (Target::Annotation(a), Action::Accept) => view.annotation_state(a) == Curation::Accepted,
        (Target::Annotation(a), Action::Reject) => view.annotation_state(a) == Curation::Rejected,
    }
}

/// Owns the curation log. Runs on its own thread so appends and fsyncs never
/// block the async workers.
fn writer_loop(
    mut log: CurationLog,
    manifest: Arc<DatasetManifest>,
    snapshot: Arc<RwLock<Snapshot>>,
    mut rx: mpsc::Receiver<WriteRequest>,
) {
    let mut last_at = log.decisions().iter().map(|d| d.at).max();
    while let Some(WriteRequest { mut decision, reply }) = rx.blocking_recv() {
        let unchanged = current_state(&snapshot.read().expect("snapshot lock").view, &decision);
        if unchanged {
            let _ = reply.send(Ok(false));
            continue;
        }
        if let Some(prev) = last_at {
            decision.at = decision.at.max(prev);
        }
        match log.append(decision) {
            Ok(d) => {
                last_at = Some(d.at);
                let mut snap = snapshot.write().expect("snapshot lock");
                snap.decisions.push(d);
                snap.view = apply_curation(&manifest, &snap.decisions);
                drop(snap);
                let _ = reply.send(Ok(true));
            }
            Err(e) => {
                log::error!("curation log append failed: {e}");
                let _ = reply.send(Err(e.to_string()));
            }
        }
    }
}

impl ReviewService {
    /// Load the dataset at `root` and start the log writer.
    pub fn open(root: &Path, page_size: usize) -> Result<ReviewService, ReviewError> {
        let manifest = Arc::new(load_manifest(root)?);
        let log = CurationLog::open(&root.join(CURATION_FILE))?;
        let decisions = log.decisions().to_vec();
        let view = apply_curation(&manifest, &decisions);
        if view.skipped > 0 {
            log::warn!("{} logged decisions name targets missing from the manifest", view.skipped);
        }
        let snapshot = Arc::new(RwLock::new(Snapshot { decisions, view }));
        let (tx, rx) = mpsc::channel(256);
        let (m, s) = (manifest.clone(), snapshot.clone());
        std::thread::Builder::new()
            .name("curation-writer".into())
            .spawn(move || writer_loop(log, m, s, rx))?;
        Ok(ReviewService {
            inner: Arc::new(Inner {
                root: root.to_path_buf(),
                manifest,
                snapshot,
                writer: Mutex::new(Some(tx)),
                page_size: page_size.max(1),
            }),
        })
    }

    pub fn manifest(&self) -> &DatasetManifest {
        &self.inner.manifest
    }

    pub fn revision(&self) -> u64 {
        self.inner.snapshot.read().expect("snapshot lock").revision()
    }

    pub fn view(&self) -> EffectiveView {
        self.inner.snapshot.read().expect("snapshot lock").view.clone()
    }

    /// Stop accepting decisions; later POSTs answer 409.
    pub fn stop_writer(&self) {
        self.inner.writer.lock().expect("writer lock").take();
    }

    /// API routes, plus static files under `/` when `static_dir` is given.
    pub fn router(&self, static_dir: Option<&Path>) -> Router {
        let mut r = Router::new()
            .route("/api/queue", get(queue))
            .route("/api/patch/{id}/image", get(patch_image))
            .route("/api/decision", post(decision))
            .route("/api/stats", get(stats));
        if let Some(dir) = static_dir {
            r = r.fallback_service(ServeDir::new(dir));
        }
        r.layer(middleware::from_fn_with_state(self.clone(), stamp_revision))
            .with_state(self.clone())
    }

    fn item(&self, view: &EffectiveView, p: &PatchEntry, position: usize) -> ReviewItem {
        let m = &self.inner.manifest;
        let img = m.image(&p.image_id).expect("manifest validated");
        let annotations: Vec<ReviewAnnotation> = view
            .patch_annotations(m, &p.patch_id)
            .into_iter()
            .map(|a| ReviewAnnotation { annotation_id: a.annotation_id(), annotation: a })
            .collect();
        ReviewItem {
            patch_id: p.patch_id.clone(),
            image_id: p.image_id.clone(),
            provider: img.provider,
            location: img.location.clone(),
            year: img.year.clone(),
            origin: p.origin,
            size: p.size,
            state: view.patch_state(&p.patch_id),
            flagged: annotations.iter().any(|a| a.annotation.flagged),
            annotations,
            position,
        }
    }

    fn ordered_patches(&self) -> Vec<&PatchEntry> {
        let mut v: Vec<&PatchEntry> = self.inner.manifest.patches.iter().collect();
        v.sort_by(|a, b| (a.image_id.as_str(), a.origin).cmp(&(b.image_id.as_str(), b.origin)));
        v
    }

    /// Items passing `filter`, in queue order.
    pub fn queue_items(&self, filter: QueueFilter, flagged_first: bool) -> (u64, Vec<ReviewItem>) {
        let snap = self.inner.snapshot.read().expect("snapshot lock");
        let mut items: Vec<ReviewItem> = self
            .ordered_patches()
            .into_iter()
            .map(|p| self.item(&snap.view, p, 0))
            .filter(|it| match filter {
                QueueFilter::All => true,
                QueueFilter::Undecided => it.state == PatchState::Undecided,
                QueueFilter::Flagged => it.flagged,
            })
            .collect();
        if flagged_first {
            items.sort_by_key(|it| !it.flagged);
        }
        for (i, it) in items.iter_mut().enumerate() {
            it.position = i;
        }
        (snap.revision(), items)
    }
}

async fn stamp_revision(State(svc): State<ReviewService>, req: Request, next: Next) -> Response {
    let mut res = next.run(req).await;
    let rev = svc.revision();
    res.headers_mut()
        .insert(REVISION_HEADER, HeaderValue::from_str(&rev.to_string()).expect("digits"));
    res
}

struct ApiError {
    status: StatusCode,
    message: String,
    revision: u64,
}

impl ApiError {
    fn new(svc: &ReviewService, status: StatusCode, message: impl Into<String>) -> ApiError {
        ApiError { status, message: message.into(), revision: svc.revision() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody { dataset_revision: self.revision, error: self.message };
        (self.status, Json(body)).into_response()
    }
}

#[derive(Debug, Deserialize)]
struct QueueParams {
    filter: Option<String>,
    page: Option<String>,
    flagged_first: Option<String>,
}

fn parse_bool(s: Option<&str>) -> Result<bool, String> {
    match s {
        None | Some("false") | Some("0") => Ok(false),
        Some("true") | Some("1") | Some("") => Ok(true),
        Some(other) => Err(format!("expected a boolean, got {other:?}")),
    }
}

async fn queue(State(svc): State<ReviewService>, Query(q): Query<QueueParams>) -> Result<Json<QueuePage>, ApiError> {
    let bad = |m: String| ApiError::new(&svc, StatusCode::BAD_REQUEST, m);
    let filter: QueueFilter = q.filter.as_deref().unwrap_or("undecided").parse().map_err(bad)?;
    let page: usize = match q.page.as_deref() {
        None => 0,
        Some(p) => p.parse().map_err(|_| bad(format!("page {p:?} is not a non-negative integer")))?,
    };
    let flagged_first = parse_bool(q.flagged_first.as_deref()).map_err(bad)?;
    let size = svc.inner.page_size;
    let (rev, items) = svc.queue_items(filter, flagged_first);
    let total = items.len();
    let items = items.into_iter().skip(page.saturating_mul(size)).take(size).collect();
    Ok(Json(QueuePage { dataset_revision: rev, filter, page, page_size: size, total, items }))
}

#[derive(Debug, Deserialize)]
struct ImageParams {
    overlay: Option<String>,
}

async fn patch_image(
    State(svc): State<ReviewService>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<ImageParams>,
) -> Result<Response, ApiError> {
    let boxes = match q.overlay.as_deref() {
        None | Some("none") => false,
        Some("boxes") => true,
        Some(other) => {
            return Err(ApiError::new(&svc, StatusCode::BAD_REQUEST, format!("unknown overlay {other:?}")));
        }
    };
    let Some(patch) = svc.inner.manifest.patch(&id) else {
        return Err(ApiError::new(&svc, StatusCode::NOT_FOUND, format!("no patch {id:?}")));
    };
    let path = svc.inner.root.join(&patch.path);
    let bytes = tokio::fs::read(&path).await.map_err(|e| {
        ApiError::new(&svc, StatusCode::INTERNAL_SERVER_ERROR, format!("{}: {e}", path.display()))
    })?;
    let body = if boxes {
        let anns = svc.view().patch_annotations(&svc.inner.manifest, &id);
        draw_overlay(&bytes, &anns).map_err(|e| ApiError::new(&svc, StatusCode::INTERNAL_SERVER_ERROR, e))?
    } else {
        bytes
    };
    Ok(([(header::CONTENT_TYPE, "image/png")], body).into_response())
}

async fn decision(State(svc): State<ReviewService>, body: Bytes) -> Result<Json<DecisionResponse>, ApiError> {
    let req: DecisionRequest = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(&svc, StatusCode::BAD_REQUEST, format!("bad decision body: {e}")))?;
    if req.actor.trim().is_empty() {
        return Err(ApiError::new(&svc, StatusCode::BAD_REQUEST, "actor must not be empty"));
    }
    let m = &svc.inner.manifest;
    let not_found = || ApiError::new(&svc, StatusCode::NOT_FOUND, format!("no patch or annotation {:?}", req.target));
    let (target, patch_id) = if m.patch(&req.target).is_some() {
        (Target::Patch, req.target.clone())
    } else {
        let owner = m.image_annotations.values().flatten().find(|a| a.annotation_id() == req.target);
        let Some(ann) = owner else { return Err(not_found()) };
        let showing = |pid: &str| m.annotations.get(pid).is_some_and(|v| v.iter().any(|a| a.annotation_id() == req.target));
        let patch_id = match &req.patch_id {
            Some(pid) if showing(pid) => pid.clone(),
            Some(pid) => {
                return Err(ApiError::new(
                    &svc,
                    StatusCode::NOT_FOUND,
                    format!("annotation {:?} is not on patch {pid:?}", req.target),
                ))
            }
            None => m
                .patches
                .iter()
                .find(|p| showing(&p.patch_id))
                .map_or_else(|| ann.image_id.clone(), |p| p.patch_id.clone()),
        };
        (Target::Annotation(req.target.clone()), patch_id)
    };
    let decision = CurationDecision {
        patch_id: patch_id.clone(),
        target: target.clone(),
        action: req.action,
        actor: req.actor,
        at: DateTime::<Utc>::from(std::time::SystemTime::now()),
        seq: 0,
    };
    let conflict = |m: String| ApiError::new(&svc, StatusCode::CONFLICT, m);
    let tx = svc.inner.writer.lock().expect("writer lock").clone();
    let Some(tx) = tx else { return Err(conflict("curation log writer is stopped".into())) };
    let (reply, rx) = oneshot::channel();
    tx.send(WriteRequest { decision, reply })
        .await
        .map_err(|_| conflict("curation log writer is unavailable".into()))?;
    let appended = rx
        .await
        .map_err(|_| conflict("curation log writer is unavailable".into()))?
        .map_err(|e| conflict(format!("curation log write failed: {e}")))?;

    let snap = svc.inner.snapshot.read().expect("snapshot lock");
    let annotation_state = match &target {
        Target::Annotation(a) => Some(snap.view.annotation_state(a)),
        Target::Patch => None,
    };
    let item = m.patch(&patch_id).map(|p| {
        let position = svc.ordered_patches().iter().position(|q| q.patch_id == p.patch_id).unwrap_or(0);
        svc.item(&snap.view, p, position)
    });
    Ok(Json(DecisionResponse {
        dataset_revision: snap.revision(),
        appended,
        target,
        patch_state: snap.view.patch_state(&patch_id),
        patch_id,
        annotation_state,
        item,
    }))
}

async fn stats(State(svc): State<ReviewService>) -> Json<StatsResponse> {
    let snap = svc.inner.snapshot.read().expect("snapshot lock");
    Json(StatsResponse {
        dataset_revision: snap.revision(),
        stats: curation_stats(&svc.inner.manifest, &snap.view),
    })
}

/// Serve the review API (and optional static assets) on `127.0.0.1:port`.
pub async fn serve(
    root: &Path,
    port: u16,
    page_size: usize,
    static_dir: Option<&Path>,
) -> Result<(), ReviewError> {
    let svc = ReviewService::open(root, page_size)?;
    let app = svc.router(static_dir);
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
    log::info!("review service on http://{}", listener.local_addr()?);
    axum::serve(listener, app).await?;
    Ok(())
}
