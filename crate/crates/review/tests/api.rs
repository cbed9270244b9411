use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use axum::Router;
use serde::de::DeserializeOwned;
use shipmatch_core::catalog::{
    apply_curation, build_manifest, curation_stats, image_dir, read_log, write_annotations, PatchState,
    CURATION_FILE,
};
use shipmatch_core::correlate::{AnnotationBox, Curation};
use shipmatch_core::geom::PixelBox;
use shipmatch_core::raster::{Pixels, Provider, SampleDepth, Sidecar};
use shipmatch_review::{
    DecisionResponse, ErrorBody, QueuePage, ReviewService, StatsResponse, REVISION_HEADER,
};
use std::fs;
use std::path::Path;
use tower::ServiceExt;

const ORIGINS: [(u32, u32); 5] = [(0, 0), (32, 0), (64, 0), (0, 32), (32, 32)];

fn ann(mmsi: u32, b: (f64, f64, f64, f64), cloud: f64) -> AnnotationBox {
    let mut a = AnnotationBox::auto("a", Some(mmsi), PixelBox::new(b.0, b.1, b.2, b.3), 60.0);
    a.set_cloud_fraction(cloud);
    a
}

/// One image, five 32 px patches, six ships; the ships on `a@32_0` and
/// `a@64_0` are cloud-flagged and `a@0_32` holds three ships.
fn dataset(root: &Path) {
    let dir = image_dir(root, Provider::Planet, "SF", "2016");
    fs::create_dir_all(&dir).unwrap();
    let sc = Sidecar {
        epsg: 32610,
        transform: [3.0, 0.0, 560000.0, 0.0, -3.0, 4190000.0],
        width: 96,
        height: 64,
        timestamp: "2016-07-01T18:30:00Z".into(),
        provider: Provider::Planet,
        gsd_m: 3.0,
        bands: None,
    };
    fs::write(dir.join("a.json"), serde_json::to_string(&sc).unwrap()).unwrap();
    let mut px = Pixels::new(96, 64, 1, SampleDepth::Eight);
    for y in 0..64 {
        for x in 0..96 {
            px.set_all(x, y, ((x * 7 + y * 3) % 200) as u16);
        }
    }
    fs::write(dir.join("a.png"), px.encode_png()).unwrap();
    let pdir = root.join("patches/a");
    fs::create_dir_all(&pdir).unwrap();
    for (x, y) in ORIGINS {
        let tile = px.crop_padded(x as i64, y as i64, 32, 32);
        fs::write(pdir.join(format!("{x}_{y}.png")), tile.encode_png()).unwrap();
    }
    let anns = vec![
        ann(1, (4.0, 4.0, 12.0, 12.0), 0.0),
        ann(2, (36.0, 4.0, 44.0, 12.0), 0.6),
        ann(3, (68.0, 4.0, 76.0, 12.0), 0.3),
        ann(4, (4.0, 36.0, 10.0, 42.0), 0.0),
        ann(5, (14.0, 36.0, 20.0, 42.0), 0.1),
        ann(6, (22.0, 36.0, 28.0, 42.0), 0.0),
    ];
    write_annotations(root, "a", &anns).unwrap();
}

fn setup() -> (tempfile::TempDir, ReviewService, Router) {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path());
    let svc = ReviewService::open(dir.path(), 2).unwrap();
    let app = svc.router(None);
    (dir, svc, app)
}

async fn get_raw(app: &Router, uri: &str) -> (StatusCode, Option<String>, Vec<u8>) {
    let res = app.clone().oneshot(Request::get(uri).body(Body::empty()).unwrap()).await.unwrap();
    let rev = res.headers().get(REVISION_HEADER).map(|v| v.to_str().unwrap().to_string());
    let status = res.status();
    (status, rev, to_bytes(res.into_body(), usize::MAX).await.unwrap().to_vec())
}

async fn get<T: DeserializeOwned>(app: &Router, uri: &str) -> (StatusCode, T) {
    let (s, _, b) = get_raw(app, uri).await;
    (s, serde_json::from_slice(&b).unwrap_or_else(|e| panic!("{uri}: {e}: {}", String::from_utf8_lossy(&b))))
}

async fn post(app: &Router, body: serde_json::Value) -> (StatusCode, Vec<u8>) {
    let req = Request::post("/api/decision")
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    (status, to_bytes(res.into_body(), usize::MAX).await.unwrap().to_vec())
}

async fn decide(app: &Router, target: &str, action: &str) -> DecisionResponse {
    let (s, b) = post(app, serde_json::json!({"target": target, "action": action, "actor": "tester"})).await;
    assert_eq!(s, StatusCode::OK, "{}", String::from_utf8_lossy(&b));
    serde_json::from_slice(&b).unwrap()
}

async fn all_items(app: &Router, filter: &str) -> Vec<String> {
    let mut out = Vec::new();
    for page in 0.. {
        let (_, p): (_, QueuePage) = get(app, &format!("/api/queue?filter={filter}&page={page}")).await;
        if p.items.is_empty() {
            break;
        }
        out.extend(p.items.into_iter().map(|i| i.patch_id));
    }
    out
}

fn log_lines(root: &Path) -> usize {
    fs::read_to_string(root.join(CURATION_FILE)).map_or(0, |s| s.lines().count())
}

#[tokio::test]
async fn fresh_queue_is_undecided_and_ordered() {
    let (_d, _svc, app) = setup();
    let (s, p): (_, QueuePage) = get(&app, "/api/queue?filter=all").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(p.total, 5);
    assert_eq!(p.page_size, 2);
    assert_eq!(p.dataset_revision, 0);
    assert!(p.items.iter().all(|i| i.state == PatchState::Undecided));
    assert_eq!(all_items(&app, "all").await, ["a@0_0", "a@0_32", "a@32_0", "a@32_32", "a@64_0"]);
    assert_eq!(all_items(&app, "undecided").await.len(), 5);
    let (_, p): (_, QueuePage) = get(&app, "/api/queue?filter=all&page=1").await;
    assert_eq!(p.items[0].position, 2);
}

#[tokio::test]
async fn flagged_filter_and_front_sorting() {
    let (_d, _svc, app) = setup();
    assert_eq!(all_items(&app, "flagged").await, ["a@32_0", "a@64_0"]);
    let (_, p): (_, QueuePage) = get(&app, "/api/queue?filter=all&flagged_first=true").await;
    assert_eq!(p.items.iter().map(|i| i.patch_id.as_str()).collect::<Vec<_>>(), ["a@32_0", "a@64_0"]);
}

#[tokio::test]
async fn page_past_the_end_is_empty() {
    let (_d, _svc, app) = setup();
    let (s, p): (_, QueuePage) = get(&app, "/api/queue?filter=all&page=99").await;
    assert_eq!(s, StatusCode::OK);
    assert!(p.items.is_empty());
    assert_eq!(p.total, 5);
}

#[tokio::test]
async fn bad_query_is_400() {
    let (_d, _svc, app) = setup();
    for uri in ["/api/queue?filter=maybe", "/api/queue?page=-1", "/api/patch/a@0_0/image?overlay=lines"] {
        let (s, rev, body) = get_raw(&app, uri).await;
        assert_eq!(s, StatusCode::BAD_REQUEST, "{uri}");
        assert_eq!(rev.as_deref(), Some("0"));
        let e: ErrorBody = serde_json::from_slice(&body).unwrap();
        assert_eq!(e.dataset_revision, 0);
    }
}

#[tokio::test]
async fn patch_image_raw_and_overlay() {
    let (d, _svc, app) = setup();
    let (s, rev, raw) = get_raw(&app, "/api/patch/a@0_32/image?overlay=none").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(rev.as_deref(), Some("0"));
    assert_eq!(raw, fs::read(d.path().join("patches/a/0_32.png")).unwrap());
    let (_, _, default) = get_raw(&app, "/api/patch/a@0_32/image").await;
    assert_eq!(default, raw);
    let (s, _, boxed) = get_raw(&app, "/api/patch/a@0_32/image?overlay=boxes").await;
    assert_eq!(s, StatusCode::OK);
    assert_ne!(boxed, raw);
    let img = image::load_from_memory(&boxed).unwrap().to_rgb8();
    assert_eq!(img.get_pixel(4, 4).0, shipmatch_review::KEPT_COLOR);
    let (s, _, _) = get_raw(&app, "/api/patch/nope@0_0/image").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn rejecting_a_patch_removes_it_from_undecided() {
    let (d, svc, app) = setup();
    let r = decide(&app, "a@0_0", "reject").await;
    assert!(r.appended);
    assert_eq!(r.patch_state, PatchState::Rejected);
    assert_eq!(r.dataset_revision, 1);
    assert_eq!(log_lines(d.path()), 1);
    assert!(!all_items(&app, "undecided").await.contains(&"a@0_0".to_string()));
    assert_eq!(svc.revision(), 1);
}

#[tokio::test]
async fn rejecting_one_of_three_annotations() {
    let (_d, _svc, app) = setup();
    let r = decide(&app, "a:5", "reject").await;
    assert_eq!(r.patch_id, "a@0_32");
    assert_eq!(r.patch_state, PatchState::Undecided);
    assert_eq!(r.annotation_state, Some(Curation::Rejected));
    let item = r.item.unwrap();
    let states: Vec<_> = item.annotations.iter().map(|a| (a.annotation_id.as_str(), a.annotation.curation)).collect();
    assert_eq!(states, [("a:4", Curation::Auto), ("a:5", Curation::Rejected), ("a:6", Curation::Auto)]);
}

#[tokio::test]
async fn repeated_decision_is_idempotent() {
    let (d, _svc, app) = setup();
    let first = decide(&app, "a@32_0", "reject").await;
    let second = decide(&app, "a@32_0", "reject").await;
    assert!(first.appended);
    assert!(!second.appended);
    assert_eq!(first.patch_state, second.patch_state);
    assert_eq!(second.dataset_revision, 1);
    assert_eq!(log_lines(d.path()), 1);
    let third = decide(&app, "a@32_0", "accept").await;
    assert!(third.appended);
    assert_eq!(third.patch_state, PatchState::Accepted);
    assert_eq!(log_lines(d.path()), 2);
}

#[tokio::test]
async fn decision_errors() {
    let (d, svc, app) = setup();
    let (s, _) = post(&app, serde_json::json!({"target": "ghost", "action": "reject", "actor": "t"})).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = post(&app, serde_json::json!({"target": "a:5", "patch_id": "a@0_0", "action": "reject", "actor": "t"})).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = post(&app, serde_json::json!({"target": "a@0_0", "action": "maybe", "actor": "t"})).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = post(&app, serde_json::json!({"target": "a@0_0", "action": "accept", "actor": " "})).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(log_lines(d.path()), 0);
    svc.stop_writer();
    let (s, _) = post(&app, serde_json::json!({"target": "a@0_0", "action": "accept", "actor": "t"})).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(log_lines(d.path()), 0);
}

#[tokio::test]
async fn stats_match_the_catalog() {
    let (d, _svc, app) = setup();
    let (_, s): (_, StatsResponse) = get(&app, "/api/stats").await;
    assert_eq!(s.stats.total.accepted, 0);
    assert_eq!(s.stats.total.undecided, 5);
    assert_eq!(s.stats.total.flagged, 2);
    decide(&app, "a@32_0", "reject").await;
    decide(&app, "a:5", "reject").await;
    for p in ["a@0_0", "a@0_32", "a@32_32", "a@64_0"] {
        decide(&app, p, "accept").await;
    }
    let (_, s): (_, StatsResponse) = get(&app, "/api/stats").await;
    assert_eq!(s.stats.total.undecided, 0);
    assert_eq!(s.stats.total.accepted, 4);
    assert_eq!(s.dataset_revision, 6);
    let m = build_manifest(d.path()).unwrap();
    let view = apply_curation(&m, &read_log(&d.path().join(CURATION_FILE)).unwrap());
    assert_eq!(s.stats, curation_stats(&m, &view));
    assert_eq!(s.stats.groups["planet/SF/2016"].rejected, 1);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_decisions_all_persist() {
    let (d, svc, app) = setup();
    let targets = ["a@0_0", "a@32_0", "a@64_0", "a@0_32", "a@32_32", "a:1", "a:2", "a:4", "a:6"];
    let handles: Vec<_> = targets
        .iter()
        .map(|t| {
            let app = app.clone();
            let t = t.to_string();
            tokio::spawn(async move { decide(&app, &t, "reject").await })
        })
        .collect();
    for h in handles {
        assert!(h.await.unwrap().appended);
    }
    assert_eq!(log_lines(d.path()), targets.len());
    assert_eq!(svc.revision(), targets.len() as u64);
    let view = svc.view();
    assert_eq!(view.patches.len(), 5);
    assert_eq!(view.annotations.len(), 4);
}

#[tokio::test]
async fn restart_recovers_state() {
    let (d, svc, app) = setup();
    decide(&app, "a@0_0", "accept").await;
    decide(&app, "a:6", "reject").await;
    let before: QueuePage = get(&app, "/api/queue?filter=all").await.1;
    svc.stop_writer();
    drop(app);
    let again = ReviewService::open(d.path(), 2).unwrap();
    let app2 = again.router(None);
    let after: QueuePage = get(&app2, "/api/queue?filter=all").await.1;
    assert_eq!(before, after);
    assert_eq!(after.dataset_revision, 2);
}

#[tokio::test]
async fn static_assets_under_root() {
    let (d, svc, _) = setup();
    let assets = d.path().join("ui");
    fs::create_dir_all(&assets).unwrap();
    fs::write(assets.join("index.html"), "<html>review</html>").unwrap();
    let app = svc.router(Some(&assets));
    let (s, rev, body) = get_raw(&app, "/").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(body, b"<html>review</html>");
    assert_eq!(rev.as_deref(), Some("0"));
    let (_, p): (_, QueuePage) = get(&app, "/api/queue").await;
    assert_eq!(p.filter, shipmatch_review::QueueFilter::Undecided);
}

#[tokio::test]
async fn get_endpoints_leave_the_log_alone() {
    let (d, _svc, app) = setup();
    for uri in ["/api/queue?filter=all", "/api/stats", "/api/patch/a@0_0/image?overlay=boxes"] {
        get_raw(&app, uri).await;
    }
    assert!(!d.path().join(CURATION_FILE).exists() || log_lines(d.path()) == 0);
}
