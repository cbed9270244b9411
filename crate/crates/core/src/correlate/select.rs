use super::CorrelateConfig;
use crate::ais::{AisRecord, NavStatus};
use crate::geo::haversine_m;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowMode {
    /// `[t - w/2, t + w/2]`
    #[default]
    Centered,
    /// `[t - w, t]`
    Trailing,
}

/// Averaged position of one stationary ship around capture time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShipObservation {
    pub mmsi: u32,
    pub mean_lat: f64,
    pub mean_lon: f64,
    pub n_reports: usize,
    pub length_m: f64,
    pub nav_status: NavStatus,
    pub window: (i64, i64),
}

/// Records grouped by MMSI and sorted by time; read-only once built.
#[derive(Clone, Debug, Default)]
pub struct AisIndex {
    by_mmsi: BTreeMap<u32, Vec<AisRecord>>,
    lengths: BTreeMap<u32, f64>,
}

impl AisIndex {
    pub fn new(records: Vec<AisRecord>) -> Self {
        let mut by_mmsi: BTreeMap<u32, Vec<AisRecord>> = BTreeMap::new();
        for r in records {
            by_mmsi.entry(r.mmsi).or_default().push(r);
        }
        let mut lengths = BTreeMap::new();
        for (mmsi, v) in by_mmsi.iter_mut() {
            v.sort_by_key(|r| r.timestamp);
            if let Some(l) = v.iter().rev().find_map(|r| r.length_m.filter(|l| *l > 0.0)) {
                lengths.insert(*mmsi, l);
            }
        }
        AisIndex { by_mmsi, lengths }
    }

    pub fn len(&self) -> usize {
        self.by_mmsi.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.by_mmsi.is_empty()
    }

    pub fn vessels(&self) -> usize {
        self.by_mmsi.len()
    }

    /// Latest known hull length for a vessel.
    pub fn length_of(&self, mmsi: u32) -> Option<f64> {
        self.lengths.get(&mmsi).copied()
    }

    /// Reports of one vessel with `t0 <= timestamp <= t1`.
    pub fn reports_between(&self, mmsi: u32, t0: i64, t1: i64) -> &[AisRecord] {
        let Some(v) = self.by_mmsi.get(&mmsi) else {
            return &[];
        };
        let lo = v.partition_point(|r| r.timestamp < t0);
        let hi = v.partition_point(|r| r.timestamp <= t1);
        &v[lo..hi.max(lo)]
    }

    pub fn mmsis(&self) -> impl Iterator<Item = u32> + '_ {
        self.by_mmsi.keys().copied()
    }
}

/// Stationary, long-enough ships reporting inside the capture window, one
/// observation per MMSI at the arithmetic mean of its positions. Vessels that
/// mix excluded (moving) and other statuses inside the window are dropped.
pub fn select_stationary(
    index: &AisIndex,
    t_image: i64,
    config: &CorrelateConfig,
) -> Vec<ShipObservation> {
    let (t0, t1) = config.window(t_image);
    let mut out = Vec::new();
    for mmsi in index.mmsis() {
        let reports = index.reports_between(mmsi, t0, t1);
        if reports.is_empty() {
            continue;
        }
        let moving = |r: &AisRecord| config.excluded_statuses.contains(&r.nav_status.code());
        if reports.iter().any(moving) {
            continue;
        }
        let fallback = index.length_of(mmsi);
        let kept: Vec<(&AisRecord, f64)> = reports
            .iter()
            .filter_map(|r| {
                let len = r.length_m.filter(|l| *l > 0.0).or(fallback)?;
                (len > config.min_length_m).then_some((r, len))
            })
            .collect();
        let Some(&(last, length_m)) = kept.last() else {
            continue;
        };
        let n = kept.len() as f64;
        let mean_lat = kept.iter().map(|(r, _)| r.lat).sum::<f64>() / n;
        let mean_lon = kept.iter().map(|(r, _)| r.lon).sum::<f64>() / n;
        let spread = kept
            .iter()
            .map(|(r, _)| haversine_m((r.lat, r.lon), (mean_lat, mean_lon)))
            .fold(0.0, f64::max);
        if spread > 2.0 * length_m {
            log::warn!(
                "mmsi {mmsi}: in-window positions spread {spread:.0} m for a {length_m:.0} m ship"
            );
        }
        out.push(ShipObservation {
            mmsi,
            mean_lat,
            mean_lon,
            n_reports: kept.len(),
            length_m,
            nav_status: last.nav_status,
            window: (t0, t1),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(mmsi: u32, t: i64, lat: f64, lon: f64, status: u8, len: Option<f64>) -> AisRecord {
        let mut r = AisRecord::new(mmsi, t, lat, lon, NavStatus::from_code(status).unwrap());
        r.length_m = len;
        r
    }

    fn select(records: Vec<AisRecord>, t: i64) -> Vec<ShipObservation> {
        select_stationary(&AisIndex::new(records), t, &CorrelateConfig::default())
    }

    #[test]
    fn moored_ship_is_averaged() {
        let t = 1_700_000_000;
        let obs = select(
            vec![
                rec(1, t - 60, 37.80000, -122.30000, 5, Some(294.0)),
                rec(1, t, 37.80001, -122.30001, 5, Some(294.0)),
                rec(1, t + 60, 37.80002, -122.30002, 5, Some(294.0)),
            ],
            t,
        );
        assert_eq!(obs.len(), 1);
        assert!((obs[0].mean_lat - 37.80001).abs() < 1e-12);
        assert!((obs[0].mean_lon + 122.30001).abs() < 1e-12);
        assert_eq!(obs[0].n_reports, 3);
        assert_eq!(obs[0].length_m, 294.0);
    }

    #[test]
    fn exclusions() {
        let t = 1_000_000;
        assert!(select(vec![rec(1, t, 0.0, 0.0, 0, Some(200.0))], t).is_empty());
        assert!(select(vec![rec(1, t, 0.0, 0.0, 1, Some(25.0))], t).is_empty());
        assert!(select(vec![rec(1, t, 0.0, 0.0, 1, Some(30.0))], t).is_empty());
        assert!(select(vec![rec(1, t + 200, 0.0, 0.0, 5, Some(200.0))], t).is_empty());
        assert_eq!(select(vec![rec(1, t + 150, 0.0, 0.0, 5, Some(200.0))], t).len(), 1);
        assert_eq!(select(vec![rec(1, t - 150, 0.0, 0.0, 8, Some(200.0))], t).len(), 1);
        // mixed motion state inside the window
        let mixed = vec![rec(1, t - 10, 0.0, 0.0, 5, Some(200.0)), rec(1, t + 10, 0.0, 0.0, 0, Some(200.0))];
        assert!(select(mixed, t).is_empty());
        assert!(select(vec![], t).is_empty());
    }

    #[test]
    fn length_from_static_report_outside_window() {
        let t = 50_000;
        let obs = select(
            vec![rec(9, t - 3000, 1.0, 1.0, 5, Some(120.0)), rec(9, t, 1.0, 1.0, 5, None)],
            t,
        );
        assert_eq!(obs.len(), 1);
        assert_eq!(obs[0].length_m, 120.0);
        assert_eq!(obs[0].n_reports, 1);
    }

    #[test]
    fn sailing_can_be_excluded() {
        let t = 0;
        let cfg = CorrelateConfig {
            excluded_statuses: vec![0, 8],
            ..Default::default()
        };
        let idx = AisIndex::new(vec![rec(1, t, 0.0, 0.0, 8, Some(100.0))]);
        assert!(select_stationary(&idx, t, &cfg).is_empty());
    }

    proptest! {
        #[test]
        fn mean_inside_hull_and_unique(
            pts in prop::collection::vec((0u32..4, -150i64..=150, -1e-3f64..1e-3, -1e-3f64..1e-3), 1..40)
        ) {
            let recs: Vec<AisRecord> = pts
                .iter()
                .map(|&(m, dt, a, b)| rec(m, dt, 10.0 + a, 20.0 + b, 5, Some(100.0)))
                .collect();
            let obs = select(recs.clone(), 0);
            let distinct: std::collections::BTreeSet<u32> = recs.iter().map(|r| r.mmsi).collect();
            prop_assert_eq!(obs.len(), distinct.len());
            for o in &obs {
                let mine: Vec<&AisRecord> = recs.iter().filter(|r| r.mmsi == o.mmsi).collect();
                let (lo_lat, hi_lat) = mine.iter().fold((f64::MAX, f64::MIN), |a, r| (a.0.min(r.lat), a.1.max(r.lat)));
                let (lo_lon, hi_lon) = mine.iter().fold((f64::MAX, f64::MIN), |a, r| (a.0.min(r.lon), a.1.max(r.lon)));
                prop_assert!(o.mean_lat >= lo_lat - 1e-12 && o.mean_lat <= hi_lat + 1e-12);
                prop_assert!(o.mean_lon >= lo_lon - 1e-12 && o.mean_lon <= hi_lon + 1e-12);
                prop_assert_eq!(o.n_reports, mine.len());
            }
        }
    }
}
