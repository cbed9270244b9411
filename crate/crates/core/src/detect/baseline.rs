use super::{Detection, Space};
use crate::geom::PixelBox;
use crate::raster::Pixels;
use serde::{Deserialize, Serialize};

/// Foreground threshold rule.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode", content = "value")]
pub enum Threshold {
    #[default]
    Otsu,
    /// Luminance strictly above this value is foreground.
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineParams {
    pub threshold: Threshold,
    pub min_area_px: u32,
}

impl Default for BaselineParams {
    fn default() -> Self {
        BaselineParams {
            threshold: Threshold::Otsu,
            min_area_px: 4,
        }
    }
}

/// Otsu threshold over integer luminance levels `0..=max`; `None` when the
/// histogram has a single occupied level.
pub fn otsu_threshold(levels: &[u16], max: u16) -> Option<u16> {
    let mut hist = vec![0u64; max as usize + 1];
    for &v in levels {
        hist[v.min(max) as usize] += 1;
    }
    if hist.iter().filter(|&&c| c > 0).count() < 2 {
        return None;
    }
    let total = levels.len() as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();
    let (mut w0, mut sum0) = (0.0f64, 0.0f64);
    let mut best = (f64::MIN, 0u16);
    for (t, &c) in hist.iter().enumerate().take(max as usize) {
        w0 += c as f64;
        sum0 += t as f64 * c as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let (m0, m1) = (sum0 / w0, (sum_all - sum0) / w1);
        let between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if between > best.0 {
            best = (between, t as u16);
        }
    }
    Some(best.1)
}

/// Threshold, label 4-connected components, and box each one large enough.
pub fn detect_baseline(pixels: &Pixels, origin: (u32, u32), params: &BaselineParams) -> Vec<Detection> {
    let (w, h) = (pixels.width() as usize, pixels.height() as usize);
    if w == 0 || h == 0 {
        return Vec::new();
    }
    let max = pixels.depth().max_value();
    let lum: Vec<u16> = pixels
        .luminance()
        .into_iter()
        .map(|v| v.round().clamp(0.0, max as f64) as u16)
        .collect();
    let cut = match params.threshold {
        Threshold::Otsu => match otsu_threshold(&lum, max) {
            Some(t) => t as f64,
            None => return Vec::new(),
        },
        Threshold::Fixed(t) => t,
    };
    let fg: Vec<bool> = lum.iter().map(|&v| v as f64 > cut).collect();
    let n_bg = fg.iter().filter(|&&f| !f).count();
    if n_bg == 0 || n_bg == fg.len() {
        return Vec::new();
    }
    let bg_mean = lum
        .iter()
        .zip(&fg)
        .filter(|(_, &f)| !f)
        .map(|(&v, _)| v as f64)
        .sum::<f64>()
        / n_bg as f64;

    let mut label = vec![u32::MAX; w * h];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    let mut next = 0u32;
    for start in 0..w * h {
        if !fg[start] || label[start] != u32::MAX {
            continue;
        }
        label[start] = next;
        stack.push(start);
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0usize, 0usize);
        let (mut area, mut sum) = (0u64, 0f64);
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
            area += 1;
            sum += lum[i] as f64;
            let mut visit = |j: usize| {
                if fg[j] && label[j] == u32::MAX {
                    label[j] = next;
                    stack.push(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        next += 1;
        if area < params.min_area_px.max(1) as u64 {
            continue;
        }
        let mean = sum / area as f64;
        let span = max as f64 - bg_mean;
        let confidence = if span > 0.0 {
            ((mean - bg_mean) / span).clamp(0.0, 1.0)
        } else {
            0.0
        };
        out.push(Detection {
            bbox: PixelBox::new(x0 as f64, y0 as f64, (x1 + 1) as f64, (y1 + 1) as f64),
            confidence,
            space: Space::Tile { origin },
        });
    }
    out
}
