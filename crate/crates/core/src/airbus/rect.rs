use super::rle::RleMask;
use super::AirbusError;
use crate::geom::PixelBox;
use crate::raster::BinaryMask;
use serde::{Deserialize, Serialize};

/// Metres per pixel of the Airbus (SPOT) imagery.
pub const AIRBUS_GSD_M: f64 = 1.5;

/// Oriented rectangle; `angle` is the direction of `side_a` in degrees,
/// measured from the +x axis towards +y, in `[-90, 90)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotatedRect {
    pub center: (f64, f64),
    pub side_a: f64,
    pub side_b: f64,
    pub angle: f64,
}

impl RotatedRect {
    pub fn length_px(&self) -> f64 {
        self.side_a.max(self.side_b)
    }

    pub fn length_m(&self, gsd_m: f64) -> f64 {
        self.length_px() * gsd_m
    }

    pub fn area(&self) -> f64 {
        self.side_a * self.side_b
    }

    pub fn corners(&self) -> [(f64, f64); 4] {
        let (s, c) = self.angle.to_radians().sin_cos();
        let (ha, hb) = (self.side_a / 2.0, self.side_b / 2.0);
        let (cx, cy) = self.center;
        let p = |u: f64, v: f64| (cx + u * c - v * s, cy + u * s + v * c);
        [p(-ha, -hb), p(ha, -hb), p(ha, hb), p(-ha, hb)]
    }
}

/// How the ship length is read off a mask.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LengthMode {
    /// Major side of the minimum-area rectangle.
    #[default]
    Major,
    /// Largest corner-to-corner distance of the mask.
    Diameter,
}

type Pt = (i64, i64);

fn cross(o: Pt, a: Pt, b: Pt) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Convex hull, counter-clockwise in a y-up frame, without collinear points.
pub(crate) fn convex_hull(mut pts: Vec<Pt>) -> Vec<Pt> {
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Pt> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Pt>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Pixel-corner points that span the same hull as the whole mask: the
/// outer corners of the leftmost and rightmost set pixel in every row.
fn mask_corners(mask: &BinaryMask) -> Vec<Pt> {
    let mut pts = Vec::new();
    for y in 0..mask.height() {
        let mut xs = (0..mask.width()).filter(|&x| mask.get(x, y));
        let Some(lo) = xs.next() else { continue };
        let hi = xs.next_back().unwrap_or(lo);
        let (y, lo, hi) = (y as i64, lo as i64, hi as i64 + 1);
        pts.extend([(lo, y), (lo, y + 1), (hi, y), (hi, y + 1)]);
    }
    pts
}

fn rle_corners(rle: &RleMask) -> Vec<Pt> {
    let mut pts = Vec::new();
    for (col, r0, r1) in rle.segments() {
        let (c, r0, r1) = (col as i64, r0 as i64, r1 as i64);
        pts.extend([(c, r0), (c + 1, r0), (c, r1), (c + 1, r1)]);
    }
    pts
}

fn norm_angle(mut deg: f64) -> f64 {
    while deg >= 90.0 {
        deg -= 180.0;
    }
    while deg < -90.0 {
        deg += 180.0;
    }
    deg
}

/// Preferred description of a rectangle: smaller |angle| first, then the
/// longer side as `side_a`.
fn canonical(center: (f64, f64), a: f64, b: f64, angle: f64) -> RotatedRect {
    let r1 = RotatedRect { center, side_a: a, side_b: b, angle: norm_angle(angle) };
    let r2 = RotatedRect { center, side_a: b, side_b: a, angle: norm_angle(angle + 90.0) };
    let key = |r: &RotatedRect| (r.angle.abs(), -(r.side_a - r.side_b).signum());
    if key(&r2) < key(&r1) {
        r2
    } else {
        r1
    }
}

const AREA_EPS: f64 = 1e-9;

/// Minimum-area rectangle over integer pixel-corner points by rotating
/// calipers on the convex hull.
fn rect_from_points(pts: Vec<Pt>) -> Result<RotatedRect, AirbusError> {
    let hull = convex_hull(pts);
    if hull.is_empty() {
        return Err(AirbusError::EmptyMask);
    }
    let n = hull.len();
    let mut best: Option<(f64, RotatedRect)> = None;
    for i in 0..n.max(1) {
        let p = hull[i];
        let q = hull[(i + 1) % n];
        let (dx, dy) = ((q.0 - p.0) as f64, (q.1 - p.1) as f64);
        let len = dx.hypot(dy);
        if len == 0.0 {
            continue;
        }
        let (ux, uy) = (dx / len, dy / len);
        let (mut u0, mut u1, mut v0, mut v1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for &(x, y) in &hull {
            let (x, y) = (x as f64, y as f64);
            let u = x * ux + y * uy;
            let v = -x * uy + y * ux;
            u0 = u0.min(u);
            u1 = u1.max(u);
            v0 = v0.min(v);
            v1 = v1.max(v);
        }
        let (a, b) = (u1 - u0, v1 - v0);
        let (um, vm) = ((u0 + u1) / 2.0, (v0 + v1) / 2.0);
        let center = (um * ux - vm * uy, um * uy + vm * ux);
        let rect = canonical(center, a, b, uy.atan2(ux).to_degrees());
        let area = a * b;
        let better = match &best {
            None => true,
            Some((ba, br)) => {
                area < ba - AREA_EPS * ba.max(1.0)
                    || ((area - ba).abs() <= AREA_EPS * ba.max(1.0) && rect.angle.abs() < br.angle.abs())
            }
        };
        if better {
            best = Some((area, rect));
        }
    }
    best.map(|b| b.1).ok_or(AirbusError::EmptyMask)
}

/// Minimum-area enclosing rectangle of the set pixels, each pixel a unit square.
pub fn min_area_rect(mask: &BinaryMask) -> Result<RotatedRect, AirbusError> {
    rect_from_points(mask_corners(mask))
}

/// Same as [`min_area_rect`] straight from runs, without rasterizing.
pub fn min_area_rect_rle(rle: &RleMask) -> Result<RotatedRect, AirbusError> {
    rect_from_points(rle_corners(rle))
}

fn diameter(pts: Vec<Pt>) -> Result<f64, AirbusError> {
    let hull = convex_hull(pts);
    if hull.is_empty() {
        return Err(AirbusError::EmptyMask);
    }
    let mut d2 = 0i64;
    for (i, a) in hull.iter().enumerate() {
        for b in &hull[i + 1..] {
            d2 = d2.max((a.0 - b.0).pow(2) + (a.1 - b.1).pow(2));
        }
    }
    Ok((d2 as f64).sqrt())
}

/// Ship length in pixels under the chosen convention.
pub fn length_px_rle(rle: &RleMask, mode: LengthMode) -> Result<f64, AirbusError> {
    match mode {
        LengthMode::Major => Ok(min_area_rect_rle(rle)?.length_px()),
        LengthMode::Diameter => diameter(rle_corners(rle)),
    }
}

/// Tight axis-aligned box of the set pixels with exclusive max edges.
pub fn fit_bbox(mask: &BinaryMask) -> Result<PixelBox, AirbusError> {
    let pts = mask_corners(mask);
    let f: Vec<(f64, f64)> = pts.iter().map(|&(x, y)| (x as f64, y as f64)).collect();
    PixelBox::enclosing(&f).ok_or(AirbusError::EmptyMask)
}

pub fn fit_bbox_rle(rle: &RleMask) -> Result<PixelBox, AirbusError> {
    let f: Vec<(f64, f64)> = rle_corners(rle).iter().map(|&(x, y)| (x as f64, y as f64)).collect();
    PixelBox::enclosing(&f).ok_or(AirbusError::EmptyMask)
}
