use super::EvalReport;
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

/// One row per regime, one column per `location/provider`, cells hold the
/// overall rate (empty when a group has no ground truth or is absent).
pub fn table_csv(reports: &[EvalReport]) -> String {
    let cols: BTreeSet<(String, String)> = reports
        .iter()
        .map(|r| (r.group.location.clone(), r.group.provider.clone()))
        .collect();
    let regimes: BTreeSet<&str> = reports.iter().map(|r| r.group.regime.as_str()).collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["regime".to_string()];
    header.extend(cols.iter().map(|(l, p)| format!("{l}/{p}")));
    w.write_record(&header).expect("in-memory csv");
    for regime in regimes {
        let mut row = vec![regime.to_string()];
        for (l, p) in &cols {
            let cell = reports
                .iter()
                .find(|r| r.group.regime == regime && &r.group.location == l && &r.group.provider == p)
                .and_then(|r| r.rate)
                .map(|v| v.to_string())
                .unwrap_or_default();
            row.push(cell);
        }
        w.write_record(&row).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Bar chart of per-bin rates; empty bins are drawn as hatched placeholders.
pub fn render_svg(report: &EvalReport) -> String {
    let (bar, gap, plot_h, left, top) = (28.0, 6.0, 200.0, 50.0, 30.0);
    let n = report.bins.len() as f64;
    let width = left + n * (bar + gap) + 20.0;
    let height = top + plot_h + 60.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="10">"#
    );
    let g = &report.group;
    let _ = writeln!(
        s,
        r#"<text x="{left}" y="18" font-size="12">{} / {} / {}: {} of {} ships</text>"#,
        escape(&g.regime),
        escape(&g.provider),
        escape(&g.location),
        report.n_detected,
        report.n_gt
    );
    let base = top + plot_h;
    let _ = writeln!(s, r##"<line x1="{left}" y1="{base}" x2="{}" y2="{base}" stroke="#333"/>"##, width - 10.0);
    for tick in [0.0, 0.5, 1.0] {
        let y = base - tick * plot_h;
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}%</text>"#, left - 4.0, y + 3.0, tick * 100.0);
    }
    for (i, b) in report.bins.iter().enumerate() {
        let x = left + i as f64 * (bar + gap) + gap / 2.0;
        match b.rate {
            Some(r) => {
                let h = r * plot_h;
                let _ = writeln!(
                    s,
                    r##"<rect x="{x}" y="{}" width="{bar}" height="{h}" fill="#3a7"><title>{}/{}</title></rect>"##,
                    base - h,
                    b.n_detected,
                    b.n_gt
                );
            }
            None => {
                let _ = writeln!(
                    s,
                    r##"<rect x="{x}" y="{}" width="{bar}" height="4" fill="#ccc"><title>no ships</title></rect>"##,
                    base - 4.0
                );
            }
        }
        let label = match b.hi_m {
            Some(hi) => format!("{}-{}", b.lo_m, hi),
            None => format!("&gt;{}", b.lo_m),
        };
        let (lx, ly) = (x + bar / 2.0, base + 12.0);
        let _ = writeln!(
            s,
            r#"<text x="{lx}" y="{ly}" transform="rotate(45 {lx} {ly})">{label}</text>"#
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Write `report.json`, `report.csv` and one `bins_<group>.svg` per group.
pub fn write_reports(reports: &[EvalReport], dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let json = serde_json::to_string_pretty(reports).map_err(io::Error::other)?;
    let p = dir.join("report.json");
    fs::write(&p, json + "\n")?;
    written.push(p);
    let p = dir.join("report.csv");
    fs::write(&p, table_csv(reports))?;
    written.push(p);
    for r in reports {
        let p = dir.join(format!("bins_{}.svg", r.group.slug()));
        fs::write(&p, render_svg(r))?;
        written.push(p);
    }
    Ok(written)
}
