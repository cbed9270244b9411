//! Axis-aligned pixel-space rectangles.

use serde::{Deserialize, Serialize};

/// Axis-aligned box in fractional pixels, `[x_min, y_min, x_max, y_max]`.
/// The max edges are exclusive in the pixel-extent sense: a single pixel at
/// `(i, j)` is the box `[i, j, i+1, j+1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct PixelBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl From<[f64; 4]> for PixelBox {
    fn from(v: [f64; 4]) -> Self {
        PixelBox {
            x_min: v[0],
            y_min: v[1],
            x_max: v[2],
            y_max: v[3],
        }
    }
}

impl From<PixelBox> for [f64; 4] {
    fn from(b: PixelBox) -> Self {
        [b.x_min, b.y_min, b.x_max, b.y_max]
    }
}

impl PixelBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        PixelBox {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    /// Square box of side `side` centred on `(cx, cy)`.
    pub fn centered(cx: f64, cy: f64, side: f64) -> Self {
        let h = side / 2.0;
        PixelBox::new(cx - h, cy - h, cx + h, cy + h)
    }

    /// Finite with strictly positive extent on both axes.
    pub fn is_valid(&self) -> bool {
        [self.x_min, self.y_min, self.x_max, self.y_max]
            .iter()
            .all(|v| v.is_finite())
            && self.x_min < self.x_max
            && self.y_min < self.y_max
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn center(&self) -> (f64, f64) {
        (
            (self.x_min + self.x_max) / 2.0,
            (self.y_min + self.y_max) / 2.0,
        )
    }

    pub fn intersection(&self, other: &PixelBox) -> Option<PixelBox> {
        let b = PixelBox::new(
            self.x_min.max(other.x_min),
            self.y_min.max(other.y_min),
            self.x_max.min(other.x_max),
            self.y_max.min(other.y_max),
        );
        (b.x_min < b.x_max && b.y_min < b.y_max).then_some(b)
    }

    pub fn intersection_area(&self, other: &PixelBox) -> f64 {
        self.intersection(other).map_or(0.0, |b| b.area())
    }

    /// Intersection over union; 0 for disjoint boxes.
    pub fn iou(&self, other: &PixelBox) -> f64 {
        let inter = self.intersection_area(other);
        if inter <= 0.0 {
            return 0.0;
        }
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            (inter / union).min(1.0)
        }
    }

    /// Closed containment: points on the boundary count as inside.
    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        self.x_min <= x && x <= self.x_max && self.y_min <= y && y <= self.y_max
    }

    pub fn translate(&self, dx: f64, dy: f64) -> PixelBox {
        PixelBox::new(
            self.x_min + dx,
            self.y_min + dy,
            self.x_max + dx,
            self.y_max + dy,
        )
    }

    pub fn scale(&self, sx: f64, sy: f64) -> PixelBox {
        PixelBox::new(
            self.x_min * sx,
            self.y_min * sy,
            self.x_max * sx,
            self.y_max * sy,
        )
    }

    /// Clip to `[0, width] x [0, height]`; `None` when nothing remains.
    pub fn clip(&self, width: f64, height: f64) -> Option<PixelBox> {
        self.intersection(&PixelBox::new(0.0, 0.0, width, height))
    }

    /// Smallest box enclosing the given points.
    pub fn enclosing(points: &[(f64, f64)]) -> Option<PixelBox> {
        let first = points.first()?;
        let mut b = PixelBox::new(first.0, first.1, first.0, first.1);
        for &(x, y) in &points[1..] {
            b.x_min = b.x_min.min(x);
            b.y_min = b.y_min.min(y);
            b.x_max = b.x_max.max(x);
            b.y_max = b.y_max.max(y);
        }
        Some(b)
    }
}
