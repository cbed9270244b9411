//! Retrieval-rate scoring of detections against AIS positions, overall and
//! per ship-length bin.

mod render;

pub use render::{render_svg, table_csv, write_reports};

use crate::correlate::ShipObservation;
use crate::detect::Detection;
use crate::geo::{geo_to_pixel, GeoRef};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// AIS position of a ship on an image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthPoint {
    pub image_id: String,
    pub mmsi: u32,
    /// Fractional `(col, row)`.
    pub pixel: (f64, f64),
    pub length_m: f64,
}

/// Project stationary-ship observations onto an image. Points falling outside
/// `[0, w] x [0, h]` or failing to project are dropped.
pub fn ground_truth(
    image_id: &str,
    observations: &[ShipObservation],
    georef: &GeoRef,
    dims: (u32, u32),
) -> Vec<GroundTruthPoint> {
    observations
        .iter()
        .filter_map(|o| {
            let (col, row) = geo_to_pixel(georef, o.mean_lat, o.mean_lon).ok()?;
            let inside = (0.0..=dims.0 as f64).contains(&col) && (0.0..=dims.1 as f64).contains(&row);
            inside.then(|| GroundTruthPoint {
                image_id: image_id.to_string(),
                mmsi: o.mmsi,
                pixel: (col, row),
                length_m: o.length_m,
            })
        })
        .collect()
}

/// Hit flag per ground-truth point: inside any detection box, edges included.
pub fn retrieval(detections: &[Detection], gts: &[GroundTruthPoint]) -> Vec<bool> {
    gts.iter()
        .map(|g| detections.iter().any(|d| d.bbox.contains_point(g.pixel.0, g.pixel.1)))
        .collect()
}

/// Detections that contain no ground-truth point.
pub fn false_alarms(detections: &[Detection], gts: &[GroundTruthPoint]) -> usize {
    detections
        .iter()
        .filter(|d| !gts.iter().any(|g| d.bbox.contains_point(g.pixel.0, g.pixel.1)))
        .count()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BinSpec {
    pub start_m: f64,
    pub width_m: f64,
    pub end_m: f64,
}

impl Default for BinSpec {
    fn default() -> Self {
        BinSpec {
            start_m: 30.0,
            width_m: 25.0,
            end_m: 400.0,
        }
    }
}

impl BinSpec {
    fn regular(&self) -> usize {
        ((self.end_m - self.start_m) / self.width_m).ceil().max(0.0) as usize
    }

    /// Edges of every bin: underflow, the regular bins (last one closed and
    /// capped at `end_m`) and overflow.
    pub fn edges(&self) -> Vec<(f64, Option<f64>)> {
        let mut v = vec![(0.0, Some(self.start_m))];
        for k in 0..self.regular() {
            let lo = self.start_m + k as f64 * self.width_m;
            v.push((lo, Some((lo + self.width_m).min(self.end_m))));
        }
        v.push((self.end_m, None));
        v
    }

    /// Index into [`BinSpec::edges`].
    pub fn index(&self, length_m: f64) -> usize {
        let n = self.regular();
        if length_m < self.start_m {
            0
        } else if length_m > self.end_m {
            n + 1
        } else {
            1 + (((length_m - self.start_m) / self.width_m).floor() as usize).min(n - 1)
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.width_m > 0.0 && self.end_m > self.start_m && self.start_m >= 0.0 {
            Ok(())
        } else {
            Err(format!("invalid length bins {self:?}"))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LengthBin {
    pub lo_m: f64,
    /// `None` for the open overflow bin.
    pub hi_m: Option<f64>,
    pub n_gt: usize,
    pub n_detected: usize,
    /// `None` when the bin is empty.
    pub rate: Option<f64>,
}

fn rate(hit: usize, n: usize) -> Option<f64> {
    (n > 0).then(|| hit as f64 / n as f64)
}

/// Per-gt results partitioned by length.
pub fn bin_by_length(results: &[(GroundTruthPoint, bool)], spec: &BinSpec) -> Vec<LengthBin> {
    let mut bins: Vec<LengthBin> = spec
        .edges()
        .into_iter()
        .map(|(lo, hi)| LengthBin { lo_m: lo, hi_m: hi, n_gt: 0, n_detected: 0, rate: None })
        .collect();
    for (g, hit) in results {
        let b = &mut bins[spec.index(g.length_m)];
        b.n_gt += 1;
        b.n_detected += *hit as usize;
    }
    for b in &mut bins {
        b.rate = rate(b.n_detected, b.n_gt);
    }
    bins
}

/// Scored results of one image.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ImageEval {
    pub results: Vec<(GroundTruthPoint, bool)>,
    pub n_detections: usize,
    pub false_alarms: usize,
}

pub fn evaluate_image(detections: &[Detection], gts: &[GroundTruthPoint]) -> ImageEval {
    let hits = retrieval(detections, gts);
    ImageEval {
        results: gts.iter().cloned().zip(hits).collect(),
        n_detections: detections.len(),
        false_alarms: false_alarms(detections, gts),
    }
}

impl ImageEval {
    /// Associative merge.
    pub fn merge(mut self, other: ImageEval) -> ImageEval {
        self.results.extend(other.results);
        self.n_detections += other.n_detections;
        self.false_alarms += other.false_alarms;
        self
    }
}

/// Report row key: detector regime x provider x location.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupKey {
    pub regime: String,
    pub provider: String,
    pub location: String,
}

impl GroupKey {
    pub fn new(regime: &str, provider: &str, location: &str) -> Self {
        GroupKey { regime: regime.into(), provider: provider.into(), location: location.into() }
    }

    pub fn slug(&self) -> String {
        format!("{}_{}_{}", self.regime, self.provider, self.location)
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '-' })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub group: GroupKey,
    pub n_gt: usize,
    pub n_detected: usize,
    pub rate: Option<f64>,
    pub bins: Vec<LengthBin>,
    /// Supplementary: detections covering no AIS position.
    pub n_detections: usize,
    pub false_alarms: usize,
}

pub fn report(groups: &BTreeMap<GroupKey, ImageEval>, spec: &BinSpec) -> Vec<EvalReport> {
    groups
        .iter()
        .map(|(key, ev)| {
            let n_gt = ev.results.len();
            let n_detected = ev.results.iter().filter(|r| r.1).count();
            EvalReport {
                group: key.clone(),
                n_gt,
                n_detected,
                rate: rate(n_detected, n_gt),
                bins: bin_by_length(&ev.results, spec),
                n_detections: ev.n_detections,
                false_alarms: ev.false_alarms,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ground_truth_projects_and_drops_outside() {
        let georef = GeoRef { epsg: 4326, transform: [0.001, 0.0, -122.5, 0.0, -0.001, 37.9] };
        let obs = |mmsi, lat, lon| ShipObservation {
            mmsi,
            mean_lat: lat,
            mean_lon: lon,
            n_reports: 3,
            length_m: 100.0,
            nav_status: crate::ais::NavStatus::from_code(5).unwrap(),
            window: (0, 300),
        };
        let gts = ground_truth("img", &[obs(1, 37.85, -122.45), obs(2, 38.5, -122.45)], &georef, (100, 100));
        assert_eq!(gts.len(), 1);
        assert_eq!(gts[0].mmsi, 1);
        assert!((gts[0].pixel.0 - 50.0).abs() < 1e-6 && (gts[0].pixel.1 - 50.0).abs() < 1e-6);
    }
    use crate::detect::Space;
    use proptest::prelude::*;

    fn gt(x: f64, y: f64, l: f64) -> GroundTruthPoint {
        GroundTruthPoint { image_id: "i".into(), mmsi: 1, pixel: (x, y), length_m: l }
    }

    fn det(b: [f64; 4]) -> Detection {
        Detection { bbox: b.into(), confidence: 0.9, space: Space::Image }
    }

    #[test]
    fn containment() {
        let d = [det([40.0, 40.0, 60.0, 60.0])];
        assert_eq!(retrieval(&d, &[gt(50.0, 50.0, 100.0)]), vec![true]);
        assert_eq!(retrieval(&d, &[gt(60.0, 40.0, 100.0)]), vec![true]);
        assert_eq!(retrieval(&[det([60.0, 60.0, 80.0, 80.0])], &[gt(50.0, 50.0, 100.0)]), vec![false]);
        assert_eq!(false_alarms(&[d[0], det([0.0, 0.0, 5.0, 5.0])], &[gt(50.0, 50.0, 1.0)]), 1);
    }

    #[test]
    fn binning() {
        let s = BinSpec::default();
        let e = s.edges();
        assert_eq!(e.len(), 17);
        assert_eq!(e[1], (30.0, Some(55.0)));
        assert_eq!(e[15], (380.0, Some(400.0)));
        assert_eq!(s.index(30.0), 1);
        assert_eq!(s.index(29.99), 0);
        assert_eq!(s.index(100.0), 3);
        assert_eq!(s.index(110.0), 4);
        assert_eq!(s.index(400.0), 15);
        assert_eq!(s.index(400.5), 16);
        let res = [(gt(0.0, 0.0, 100.0), true), (gt(0.0, 0.0, 110.0), true), (gt(0.0, 0.0, 120.0), false)];
        let b = bin_by_length(&res, &s);
        // [80, 105) holds 100; [105, 130) holds 110 and 120
        assert_eq!((b[3].lo_m, b[3].n_gt, b[3].rate), (80.0, 1, Some(1.0)));
        assert_eq!((b[4].lo_m, b[4].n_gt, b[4].rate), (105.0, 2, Some(0.5)));
        assert_eq!(b[5].rate, None);
    }

    #[test]
    fn two_groups() {
        let mut groups = BTreeMap::new();
        for loc in ["SF", "LB"] {
            let results = (0..10).map(|i| (gt(0.0, 0.0, 100.0), i < 5)).collect();
            groups.insert(GroupKey::new("baseline", "planet", loc), ImageEval { results, n_detections: 5, false_alarms: 0 });
        }
        let r = report(&groups, &BinSpec::default());
        assert!(r.iter().all(|g| g.rate == Some(0.5) && g.n_gt == 10));
        assert_eq!(r[0].bins.iter().map(|b| b.n_gt).sum::<usize>(), 10);
    }

    fn scene() -> impl Strategy<Value = (Vec<Detection>, Vec<GroundTruthPoint>)> {
        let d = prop::collection::vec((0.0f64..100.0, 0.0f64..100.0, 1.0f64..30.0, 1.0f64..30.0), 0..15)
            .prop_map(|v| v.into_iter().map(|(x, y, w, h)| det([x, y, x + w, y + h])).collect::<Vec<_>>());
        let g = prop::collection::vec((0.0f64..130.0, 0.0f64..130.0, 0.0f64..450.0), 0..20)
            .prop_map(|v| v.into_iter().map(|(x, y, l)| gt(x.round(), y.round(), l)).collect::<Vec<_>>());
        (d, g)
    }

    proptest! {
        #[test]
        fn oracle_monotone_permutation((d, g) in scene(), extra in (0.0f64..100.0, 0.0f64..100.0)) {
            let flags = retrieval(&d, &g);
            for (i, p) in g.iter().enumerate() {
                let mut hit = false;
                for b in &d {
                    hit |= b.bbox.x_min <= p.pixel.0 && p.pixel.0 <= b.bbox.x_max && b.bbox.y_min <= p.pixel.1 && p.pixel.1 <= b.bbox.y_max;
                }
                prop_assert_eq!(flags[i], hit);
            }
            let mut more = d.clone();
            more.push(det([extra.0, extra.1, extra.0 + 10.0, extra.1 + 10.0]));
            let more_flags = retrieval(&more, &g);
            prop_assert!(flags.iter().zip(&more_flags).all(|(a, b)| !a || *b));
            let mut rd = d.clone();
            rd.reverse();
            prop_assert_eq!(retrieval(&rd, &g), flags.clone());
            let mut rg = g.clone();
            rg.reverse();
            let mut rf = retrieval(&d, &rg);
            rf.reverse();
            prop_assert_eq!(rf, flags.clone());
            let res: Vec<_> = g.iter().cloned().zip(flags).collect();
            let bins = bin_by_length(&res, &BinSpec::default());
            prop_assert_eq!(bins.iter().map(|b| b.n_gt).sum::<usize>(), g.len());
        }
    }
}
