use crate::{Cli, Command};
use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use shipmatch_core::airbus::{augment_annotations, item_rng, prepare_index, read_kaggle_index};
use shipmatch_core::ais::{ingest_nmea, parse_cadastre_csv, parse_utc, AisRecord};
use shipmatch_core::catalog::{
    apply_curation, build_manifest, curation_stats, export, keeps, load_manifest, read_log, write_annotations,
    write_patch, Config, DatasetManifest, ExportFormat, ImageEntry, CURATION_FILE,
};
use shipmatch_core::correlate::{annotate_image, select_stationary, AisIndex, AnnotateCounters, AnnotationBox};
use shipmatch_core::detect::{detect_tiles, merge_tiles, Detection, DetectorSpec};
use shipmatch_core::eval::{evaluate_image, ground_truth, report, write_reports, GroupKey, ImageEval};
use shipmatch_core::jsonl;
use shipmatch_core::raster::{
    clip_boxes_to_window, extract_tile, load_bundle, percentile_stretch, tile_plan, Pixels, RasterBundle,
    SampleDepth,
};
use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

pub fn run(cli: &Cli, cfg: &Config) -> Result<()> {
    let root = cli.root.as_path();
    match &cli.command {
        Command::IngestAis { inputs, out, nmea_time } => {
            let out = out.clone().unwrap_or_else(|| root.join("ais/records.jsonl"));
            ingest_ais(inputs, &out, nmea_time.as_deref())
        }
        Command::Annotate { ais } => {
            let ais = ais.clone().unwrap_or_else(|| root.join("ais/records.jsonl"));
            annotate(root, cfg, &ais)
        }
        Command::Tile { all } => tile(root, cfg, *all),
        Command::AirbusPrepare { index, out } => {
            let out = out.clone().unwrap_or_else(|| root.join("airbus"));
            airbus_prepare(cfg, index, &out)
        }
        Command::Augment { images, annotations, out, copies } => {
            let anns = annotations.clone().unwrap_or_else(|| root.join("airbus/annotations.jsonl"));
            let out = out.clone().unwrap_or_else(|| root.join("airbus/augmented"));
            augment(cfg, cli.seed, images, &anns, &out, *copies)
        }
        Command::Detect { regime } => {
            let regime = regime.clone().unwrap_or_else(|| match cfg.detect.detector {
                DetectorSpec::Baseline(_) => "baseline".into(),
                DetectorSpec::External(_) => "external".into(),
            });
            detect(root, cfg, &regime)
        }
        Command::Evaluate { regime, out } => {
            let out = out.clone().unwrap_or_else(|| root.join("reports"));
            evaluate(root, cfg, regime, &out)
        }
        Command::ServeReview { port, static_dir } => {
            let port = port.unwrap_or(cfg.review.port);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(shipmatch_review::serve(root, port, cfg.review.page_size, static_dir.as_deref()))?;
            Ok(())
        }
        Command::Export { policy, out } => {
            let manifest = load_manifest(root)?;
            let view = apply_curation(&manifest, &read_log(&root.join(CURATION_FILE))?);
            let policy = policy.unwrap_or(cfg.export.policy);
            let s = export(root, &manifest, &view, policy, ExportFormat::Jsonl, out)?;
            print_json(&serde_json::json!({
                "out_dir": s.out_dir,
                "patches": s.patches,
                "annotations": s.annotations,
                "files": s.files.len(),
            }))
        }
        Command::Stats => {
            let manifest = load_manifest(root)?;
            let view = apply_curation(&manifest, &read_log(&root.join(CURATION_FILE))?);
            print_json(&serde_json::json!({
                "catalog": manifest.stats,
                "curation": curation_stats(&manifest, &view),
            }))
        }
    }
}

fn print_json<T: Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    jsonl::write_lines(BufWriter::new(f), items).with_context(|| format!("writing {}", path.display()))
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    jsonl::read_lines(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

fn is_csv(p: &Path) -> bool {
    p.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn ingest_ais(inputs: &[PathBuf], out: &Path, nmea_time: Option<&str>) -> Result<()> {
    let fallback = match nmea_time {
        Some(t) => Some(parse_utc(t).ok_or_else(|| anyhow!("--nmea-time {t:?} is not an ISO-8601 time"))?),
        None => None,
    };
    let mut records: Vec<AisRecord> = Vec::new();
    for input in inputs {
        let f = File::open(input).with_context(|| format!("opening {}", input.display()))?;
        if is_csv(input) {
            let parsed = parse_cadastre_csv(f).with_context(|| format!("parsing {}", input.display()))?;
            log::info!(
                "{}: {} records, {} rejected rows",
                input.display(),
                parsed.records.len(),
                parsed.total_rejects()
            );
            for r in parsed.rejects.iter().take(5) {
                log::warn!("{} line {}: {}", input.display(), r.line, r.reason);
            }
            records.extend(parsed.records);
        } else {
            let (recs, stats) = ingest_nmea(BufReader::new(f), fallback)?;
            log::info!("{}: {stats:?}", input.display());
            records.extend(recs);
        }
    }
    records.sort_by_key(|r| (r.mmsi, r.timestamp));
    write_jsonl(out, &records)?;
    log::info!("wrote {} records to {}", records.len(), out.display());
    Ok(())
}

fn open_image(root: &Path, e: &ImageEntry) -> Result<RasterBundle> {
    let mask = e.mask_path.as_ref().map(|m| root.join(m));
    load_bundle(&root.join(&e.image_path), &root.join(&e.sidecar_path), mask.as_deref())
        .with_context(|| format!("loading image {}", e.image_id))
}

/// 8-bit rendition used for patches and detection.
fn display_bundle(b: RasterBundle, cfg: &Config) -> Result<RasterBundle> {
    if b.pixels().depth() == SampleDepth::Eight {
        return Ok(b);
    }
    let (px, _) = percentile_stretch(b.pixels(), cfg.raster.stretch_low_pct, cfg.raster.stretch_high_pct);
    Ok(RasterBundle::new(b.id(), px, b.sidecar().clone(), b.cloud_mask().cloned())?)
}

fn annotate(root: &Path, cfg: &Config, ais: &Path) -> Result<()> {
    let records: Vec<AisRecord> = read_jsonl(ais)?;
    let index = AisIndex::new(records);
    let manifest = build_manifest(root)?;
    let results: Vec<Result<(String, AnnotateCounters)>> = manifest
        .images
        .par_iter()
        .map(|e| {
            let bundle = open_image(root, e)?;
            let a = annotate_image(&bundle, &index, &cfg.correlate)?;
            write_annotations(root, &e.image_id, &a.boxes)?;
            Ok((e.image_id.clone(), a.counters))
        })
        .collect();
    let mut total = AnnotateCounters::default();
    for r in results {
        let (id, c) = r?;
        log::info!("{id}: {} observed, {} boxed, {} off image, {} cloud-flagged", c.observations, c.matched, c.off_image, c.flagged);
        total.observations += c.observations;
        total.matched += c.matched;
        total.off_image += c.off_image;
        total.flagged += c.flagged;
    }
    let m = build_manifest(root)?;
    m.save(root)?;
    print_json(&total)
}

fn tile(root: &Path, cfg: &Config, all: bool) -> Result<()> {
    let manifest = build_manifest(root)?;
    let (size, overlap) = (cfg.tiling.size, cfg.tiling.overlap);
    let written: Vec<Result<usize>> = manifest
        .images
        .par_iter()
        .map(|e| {
            let bundle = display_bundle(open_image(root, e)?, cfg)?;
            let boxes = manifest.image_annotations.get(&e.image_id).map(Vec::as_slice).unwrap_or(&[]);
            let dir = root.join("patches").join(&e.image_id);
            if dir.exists() {
                fs::remove_dir_all(&dir).with_context(|| format!("clearing {}", dir.display()))?;
            }
            let mut n = 0;
            for origin in tile_plan(bundle.width(), bundle.height(), size, overlap)? {
                if !all && clip_boxes_to_window(origin, size, boxes).is_empty() {
                    continue;
                }
                write_patch(root, &extract_tile(&bundle, origin, size))?;
                n += 1;
            }
            Ok(n)
        })
        .collect();
    let mut n = 0;
    for w in written {
        n += w?;
    }
    let m = build_manifest(root)?;
    m.save(root)?;
    log::info!("wrote {n} patches");
    print_json(&m.stats)
}

fn airbus_prepare(cfg: &Config, index: &Path, out: &Path) -> Result<()> {
    let f = File::open(index).with_context(|| format!("opening {}", index.display()))?;
    let rows = read_kaggle_index(f)?;
    let a = &cfg.airbus;
    let (anns, summary) = prepare_index(&rows, a.length_mode, a.gsd_m, a.min_length_m);
    write_jsonl(&out.join("annotations.jsonl"), &anns)?;
    fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    print_json(&summary)
}

fn augment(cfg: &Config, seed: u64, images: &Path, anns_path: &Path, out: &Path, copies: u32) -> Result<()> {
    let anns: Vec<AnnotationBox> = read_jsonl(anns_path)?;
    let mut by_image: BTreeMap<String, Vec<AnnotationBox>> = BTreeMap::new();
    for a in anns {
        by_image.entry(a.image_id.clone()).or_default().push(a);
    }
    cfg.airbus.augment.validate()?;
    fs::create_dir_all(out)?;
    let results: Vec<Result<Vec<AnnotationBox>>> = by_image
        .par_iter()
        .map(|(id, anns)| {
            let path = images.join(id);
            let bytes = fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
            let px = Pixels::decode(&bytes).map_err(|e| anyhow!("{}: {e}", path.display()))?;
            let stem = Path::new(id).file_stem().and_then(|s| s.to_str()).unwrap_or(id);
            let mut kept = Vec::new();
            for k in 0..copies {
                let item = format!("{id}#{k}");
                let ops = cfg.airbus.augment.sample(&mut item_rng(seed, &item))?;
                let (aug, boxes) = augment_annotations(&px, anns, &ops)?;
                let name = format!("{stem}_aug{k}.png");
                fs::write(out.join(&name), aug.encode_png())?;
                kept.extend(boxes.into_iter().map(|mut b| {
                    b.image_id = name.clone();
                    b.source = Some("airbus-augmented".into());
                    b
                }));
            }
            Ok(kept)
        })
        .collect();
    let mut all = Vec::new();
    for r in results {
        all.extend(r?);
    }
    write_jsonl(&out.join("annotations.jsonl"), &all)?;
    print_json(&serde_json::json!({"images": by_image.len() as u64 * copies as u64, "annotations": all.len()}))
}

fn detections_path(root: &Path, regime: &str, image_id: &str) -> PathBuf {
    root.join("detections").join(regime).join(format!("{image_id}.jsonl"))
}

fn detect(root: &Path, cfg: &Config, regime: &str) -> Result<()> {
    if regime.is_empty() || regime.contains(['/', '\\']) {
        bail!("regime {regime:?} must be a plain name");
    }
    cfg.detect.detector.validate()?;
    let manifest = load_manifest(root)?;
    let (size, overlap) = (cfg.tiling.size, cfg.tiling.overlap);
    let run_one = |e: &ImageEntry| -> Result<usize> {
        let bundle = display_bundle(open_image(root, e)?, cfg)?;
        let tiles: Vec<_> = tile_plan(bundle.width(), bundle.height(), size, overlap)?
            .into_iter()
            .map(|o| extract_tile(&bundle, o, size))
            .collect();
        let per_tile = detect_tiles(&tiles, &cfg.detect.detector)?;
        let keyed: Vec<((u32, u32), Vec<Detection>)> = tiles.iter().map(|t| t.origin).zip(per_tile).collect();
        let merged = merge_tiles(&keyed, cfg.detect.iou_threshold, cfg.detect.confidence_floor);
        write_jsonl(&detections_path(root, regime, &e.image_id), &merged)?;
        Ok(merged.len())
    };
    // The external exchange directory admits one request at a time.
    let counts: Vec<Result<usize>> = match cfg.detect.detector {
        DetectorSpec::Baseline(_) => manifest.images.par_iter().map(run_one).collect(),
        DetectorSpec::External(_) => manifest.images.iter().map(run_one).collect(),
    };
    let mut total = 0;
    for c in counts {
        total += c?;
    }
    print_json(&serde_json::json!({"regime": regime, "images": manifest.images.len(), "detections": total}))
}

fn ground_truth_for(
    manifest: &DatasetManifest,
    index: &AisIndex,
    cfg: &Config,
    e: &ImageEntry,
) -> Result<Vec<shipmatch_core::eval::GroundTruthPoint>> {
    let t = parse_utc(&e.timestamp).ok_or_else(|| anyhow!("{}: bad timestamp {:?}", e.image_id, e.timestamp))?;
    let valid: BTreeSet<u32> = manifest
        .image_annotations
        .get(&e.image_id)
        .into_iter()
        .flatten()
        .filter(|a| keeps(a))
        .filter_map(|a| a.mmsi)
        .collect();
    let obs: Vec<_> = select_stationary(index, t, &cfg.correlate)
        .into_iter()
        .filter(|o| valid.contains(&o.mmsi))
        .collect();
    Ok(ground_truth(&e.image_id, &obs, &e.georef, (e.width, e.height)))
}

fn evaluate(root: &Path, cfg: &Config, regimes: &[String], out: &Path) -> Result<()> {
    let base = load_manifest(root)?;
    let view = apply_curation(&base, &read_log(&root.join(CURATION_FILE))?);
    let manifest = view.effective_manifest(&base);
    let index = AisIndex::new(read_jsonl(&root.join("ais/records.jsonl"))?);
    let regimes: Vec<String> = if regimes.is_empty() {
        let dir = root.join("detections");
        let mut v: Vec<String> = fs::read_dir(&dir)
            .with_context(|| format!("listing {}", dir.display()))?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_dir())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .collect();
        v.sort();
        v
    } else {
        regimes.to_vec()
    };
    if regimes.is_empty() {
        bail!("no detections found; run `shipmatch detect` first");
    }
    let mut groups: BTreeMap<GroupKey, ImageEval> = BTreeMap::new();
    for e in &manifest.images {
        let gts = ground_truth_for(&manifest, &index, cfg, e)?;
        for regime in &regimes {
            let path = detections_path(root, regime, &e.image_id);
            let dets: Vec<Detection> = if path.exists() {
                read_jsonl(&path)?
            } else {
                log::warn!("no {regime} detections for {}", e.image_id);
                Vec::new()
            };
            let key = GroupKey::new(regime, e.provider.as_str(), &e.location);
            let ev = groups.remove(&key).unwrap_or_default().merge(evaluate_image(&dets, &gts));
            groups.insert(key, ev);
        }
    }
    cfg.bins.validate().map_err(|e| anyhow!(e))?;
    let reports = report(&groups, &cfg.bins);
    let files = write_reports(&reports, out)?;
    for r in &reports {
        let rate = r.rate.map_or("n/a".to_string(), |v| format!("{:.3}", v));
        println!(
            "{} {} {}: {}/{} retrieved ({rate}), {} detections, {} without AIS",
            r.group.regime, r.group.provider, r.group.location, r.n_detected, r.n_gt, r.n_detections, r.false_alarms
        );
    }
    log::info!("wrote {} report files to {}", files.len(), out.display());
    Ok(())
}
