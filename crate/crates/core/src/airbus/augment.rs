use super::AirbusError;
use crate::correlate::AnnotationBox;
use crate::geom::PixelBox;
use crate::raster::Pixels;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const SCALE_RANGE: (f64, f64) = (0.5, 0.7);
pub const ROTATE_RANGE_DEG: (f64, f64) = (-45.0, 45.0);
pub const BLUR_SIGMA_RANGE: (f64, f64) = (0.0, 0.5);
/// Rotated boxes keeping less than this share of their area in frame are dropped.
pub const MIN_VISIBLE_FRACTION: f64 = 0.5;

/// One concrete augmentation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", content = "value", rename_all = "lowercase")]
pub enum AugmentOp {
    Scale(f64),
    /// Degrees, counter-clockwise on screen.
    Rotate(f64),
    /// Gaussian sigma in pixels.
    Blur(f64),
}

/// Ranges augmentations are drawn from; every range must sit inside the
/// published bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentSpec {
    pub scale: Option<(f64, f64)>,
    pub rotate_deg: Option<(f64, f64)>,
    pub blur_sigma: Option<(f64, f64)>,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        AugmentSpec {
            scale: Some(SCALE_RANGE),
            rotate_deg: Some(ROTATE_RANGE_DEG),
            blur_sigma: Some(BLUR_SIGMA_RANGE),
        }
    }
}

fn check_range(name: &str, r: Option<(f64, f64)>, bounds: (f64, f64)) -> Result<(), AirbusError> {
    if let Some((lo, hi)) = r {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi && lo >= bounds.0 && hi <= bounds.1) {
            return Err(AirbusError::Config(format!(
                "{name} range [{lo}, {hi}] outside [{}, {}]",
                bounds.0, bounds.1
            )));
        }
    }
    Ok(())
}

impl AugmentSpec {
    pub fn validate(&self) -> Result<(), AirbusError> {
        check_range("scale", self.scale, SCALE_RANGE)?;
        check_range("rotate", self.rotate_deg, ROTATE_RANGE_DEG)?;
        check_range("blur", self.blur_sigma, BLUR_SIGMA_RANGE)
    }

    /// Draw one op per enabled range, uniformly, in the order scale, rotate, blur.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Result<Vec<AugmentOp>, AirbusError> {
        self.validate()?;
        let draw = |rng: &mut R, (lo, hi): (f64, f64)| if lo == hi { lo } else { rng.random_range(lo..=hi) };
        let mut ops = Vec::new();
        if let Some(r) = self.scale {
            ops.push(AugmentOp::Scale(draw(rng, r)));
        }
        if let Some(r) = self.rotate_deg {
            ops.push(AugmentOp::Rotate(draw(rng, r)));
        }
        if let Some(r) = self.blur_sigma {
            ops.push(AugmentOp::Blur(draw(rng, r)));
        }
        Ok(ops)
    }
}

/// Per-item RNG derived from the global seed and a stable item id.
pub fn item_rng(global_seed: u64, item_id: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(global_seed.to_le_bytes());
    h.update(item_id.as_bytes());
    let d = h.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&d);
    ChaCha8Rng::from_seed(seed)
}

fn sample_bilinear(src: &Pixels, x: f64, y: f64, ch: usize, fill_outside: bool) -> Option<f64> {
    let (w, h) = (src.width() as i64, src.height() as i64);
    // sample positions are pixel-centre based
    let (fx, fy) = (x - 0.5, y - 0.5);
    if fill_outside && (fx < -0.5 || fy < -0.5 || fx > w as f64 - 0.5 || fy > h as f64 - 0.5) {
        return None;
    }
    let (x0, y0) = (fx.floor(), fy.floor());
    let (tx, ty) = (fx - x0, fy - y0);
    let at = |xi: i64, yi: i64| -> f64 {
        let xi = xi.clamp(0, w - 1) as u32;
        let yi = yi.clamp(0, h - 1) as u32;
        src.pixel(xi, yi)[ch] as f64
    };
    let (x0, y0) = (x0 as i64, y0 as i64);
    let top = at(x0, y0) * (1.0 - tx) + at(x0 + 1, y0) * tx;
    let bot = at(x0, y0 + 1) * (1.0 - tx) + at(x0 + 1, y0 + 1) * tx;
    Some(top * (1.0 - ty) + bot * ty)
}

fn quantize(v: f64, max: u16) -> u16 {
    v.round().clamp(0.0, max as f64) as u16
}

fn resample(src: &Pixels, out_w: u32, out_h: u32, map: impl Fn(f64, f64) -> (f64, f64), zero_fill: bool) -> Pixels {
    let mut out = Pixels::new(out_w, out_h, src.channels(), src.depth());
    let max = src.depth().max_value();
    for y in 0..out_h {
        for x in 0..out_w {
            let (sx, sy) = map(x as f64 + 0.5, y as f64 + 0.5);
            let px = out.pixel_mut(x, y);
            for (c, v) in px.iter_mut().enumerate() {
                *v = sample_bilinear(src, sx, sy, c, zero_fill).map_or(0, |s| quantize(s, max));
            }
        }
    }
    out
}

fn scale(patch: &Pixels, boxes: &[PixelBox], s: f64) -> (Pixels, Vec<PixelBox>) {
    let w = ((patch.width() as f64 * s).round() as u32).max(1);
    let h = ((patch.height() as f64 * s).round() as u32).max(1);
    let out = resample(patch, w, h, |x, y| (x / s, y / s), false);
    (out, boxes.iter().map(|b| b.scale(s, s)).collect())
}

/// Rotate `(x, y)` about `(cx, cy)` by `deg`, counter-clockwise on screen (y down).
pub fn rotate_point(x: f64, y: f64, cx: f64, cy: f64, deg: f64) -> (f64, f64) {
    let (s, c) = deg.to_radians().sin_cos();
    let (dx, dy) = (x - cx, y - cy);
    (cx + dx * c + dy * s, cy - dx * s + dy * c)
}

fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < 1e-9 {
        r
    } else {
        v
    }
}

fn rotate(patch: &Pixels, boxes: &[PixelBox], deg: f64) -> (Pixels, Vec<PixelBox>) {
    let (w, h) = (patch.width() as f64, patch.height() as f64);
    let (cx, cy) = (w / 2.0, h / 2.0);
    let out = if deg == 0.0 {
        patch.clone()
    } else {
        resample(
            patch,
            patch.width(),
            patch.height(),
            |x, y| {
                let (sx, sy) = rotate_point(x, y, cx, cy, -deg);
                (snap(sx * 2.0) / 2.0, snap(sy * 2.0) / 2.0)
            },
            true,
        )
    };
    let kept = boxes.iter().filter_map(|b| rotate_box(b, patch.width(), patch.height(), deg)).collect();
    (out, kept)
}

/// Axis-aligned hull of a rotated box, clipped; `None` when less than
/// [`MIN_VISIBLE_FRACTION`] of the hull stays inside.
fn rotate_box(b: &PixelBox, width: u32, height: u32, deg: f64) -> Option<PixelBox> {
    let (w, h) = (width as f64, height as f64);
    let (cx, cy) = (w / 2.0, h / 2.0);
    let corners = [(b.x_min, b.y_min), (b.x_max, b.y_min), (b.x_max, b.y_max), (b.x_min, b.y_max)]
        .map(|(x, y)| rotate_point(x, y, cx, cy, deg));
    let hull = PixelBox::enclosing(&corners)?;
    let hull = PixelBox::new(snap(hull.x_min), snap(hull.y_min), snap(hull.x_max), snap(hull.y_max));
    let inside = hull.clip(w, h)?;
    (inside.area() >= MIN_VISIBLE_FRACTION * hull.area()).then_some(inside)
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as i64;
    let k: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let sum: f64 = k.iter().sum();
    k.into_iter().map(|v| v / sum).collect()
}

fn blur(patch: &Pixels, sigma: f64) -> Pixels {
    if sigma <= 0.0 {
        return patch.clone();
    }
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as i64;
    let (w, h, c) = (patch.width() as i64, patch.height() as i64, patch.channels() as usize);
    let mut tmp = vec![0.0f64; (w * h) as usize * c];
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let mut acc = 0.0;
                for (i, kv) in k.iter().enumerate() {
                    let xi = (x + i as i64 - r).clamp(0, w - 1);
                    acc += kv * patch.pixel(xi as u32, y as u32)[ch] as f64;
                }
                tmp[((y * w + x) as usize) * c + ch] = acc;
            }
        }
    }
    let mut out = Pixels::new(patch.width(), patch.height(), patch.channels(), patch.depth());
    let max = patch.depth().max_value();
    for y in 0..h {
        for x in 0..w {
            let px = out.pixel_mut(x as u32, y as u32);
            for (ch, v) in px.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (i, kv) in k.iter().enumerate() {
                    let yi = (y + i as i64 - r).clamp(0, h - 1);
                    acc += kv * tmp[((yi * w + x) as usize) * c + ch];
                }
                *v = quantize(acc, max);
            }
        }
    }
    out
}

/// Apply one augmentation to a patch and its boxes. Ranges are only checked
/// for sanity here; [`AugmentSpec`] holds the sampling bounds.
pub fn augment(patch: &Pixels, boxes: &[PixelBox], op: AugmentOp) -> Result<(Pixels, Vec<PixelBox>), AirbusError> {
    match op {
        AugmentOp::Scale(s) if s > 0.0 && s <= 1.0 => Ok(scale(patch, boxes, s)),
        AugmentOp::Rotate(d) if d.is_finite() && (-180.0..=180.0).contains(&d) => Ok(rotate(patch, boxes, d)),
        AugmentOp::Blur(s) if (0.0..=10.0).contains(&s) => Ok((blur(patch, s), boxes.to_vec())),
        other => Err(AirbusError::Config(format!("invalid augmentation {other:?}"))),
    }
}

/// Apply a sequence of ops.
pub fn augment_all(patch: &Pixels, boxes: &[PixelBox], ops: &[AugmentOp]) -> Result<(Pixels, Vec<PixelBox>), AirbusError> {
    let mut cur = (patch.clone(), boxes.to_vec());
    for &op in ops {
        cur = augment(&cur.0, &cur.1, op)?;
    }
    Ok(cur)
}

/// Apply a sequence of ops to a patch and its annotations, keeping every
/// surviving annotation's metadata.
pub fn augment_annotations(
    patch: &Pixels,
    annotations: &[AnnotationBox],
    ops: &[AugmentOp],
) -> Result<(Pixels, Vec<AnnotationBox>), AirbusError> {
    let mut px = patch.clone();
    let mut anns = annotations.to_vec();
    for &op in ops {
        let (w, h) = (px.width(), px.height());
        px = augment(&px, &[], op)?.0;
        anns = anns
            .into_iter()
            .filter_map(|mut a| {
                a.bbox = match op {
                    AugmentOp::Scale(s) => a.bbox.scale(s, s),
                    AugmentOp::Rotate(d) => rotate_box(&a.bbox, w, h, d)?,
                    AugmentOp::Blur(_) => a.bbox,
                };
                Some(a)
            })
            .collect();
    }
    Ok((px, anns))
}
