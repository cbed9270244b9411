use shipmatch_core::detect::{run_external, DetectError, ExternalParams};
use shipmatch_core::raster::{Pixels, SampleDepth, Tile};
use std::path::PathBuf;

fn tiles() -> Vec<Tile> {
    [(0, 0), (600, 0)]
        .into_iter()
        .map(|origin| Tile {
            parent_id: "scene".into(),
            origin,
            size: 32,
            pixels: Pixels::new(32, 32, 1, SampleDepth::Eight),
            pad_fraction: 0.0,
        })
        .collect()
}

fn fixture() -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures/echo_detector.sh")
        .display()
        .to_string()
}

#[test]
fn echo_detector_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let params = ExternalParams {
        exchange_dir: dir.path().to_path_buf(),
        command: Some(format!("sh {} {{request_dir}}", fixture())),
        timeout_s: 20.0,
    };
    let out = run_external(&tiles(), &params).unwrap();
    assert_eq!(out.len(), 2);
    assert_eq!(out["scene@600_0"][0].confidence, 0.9);
    assert!(dir.path().join("tiles/scene_600_0.png").exists());
    assert!(!dir.path().join(".lock").exists());
}

#[test]
fn slow_detector_times_out() {
    let dir = tempfile::tempdir().unwrap();
    let params = ExternalParams {
        exchange_dir: dir.path().to_path_buf(),
        command: Some("sleep 5".into()),
        timeout_s: 0.3,
    };
    assert_eq!(run_external(&tiles(), &params), Err(DetectError::ExternalTimeout(0.3)));
}

#[test]
fn polling_without_command() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().to_path_buf();
    let writer = std::thread::spawn({
        let path = path.clone();
        move || {
            while !path.join("request.json").exists() {
                std::thread::sleep(std::time::Duration::from_millis(10));
            }
            std::fs::write(path.join("response.json"), "").unwrap();
        }
    });
    let params = ExternalParams { exchange_dir: path, command: None, timeout_s: 10.0 };
    let out = run_external(&tiles(), &params).unwrap();
    writer.join().unwrap();
    assert!(out.is_empty());
}

#[test]
fn busy_directory_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join(".lock"), "").unwrap();
    let params = ExternalParams { exchange_dir: dir.path().to_path_buf(), command: Some("true".into()), timeout_s: 1.0 };
    assert!(matches!(run_external(&tiles(), &params), Err(DetectError::Busy(_))));
}
