use super::bundle::RasterBundle;
use super::pixels::Pixels;
use super::RasterError;
use crate::correlate::AnnotationBox;
use crate::geom::PixelBox;

pub const DEFAULT_TILE_SIZE: u32 = 800;
pub const DEFAULT_OVERLAP: u32 = 200;
/// A box is carried into a tile when at least this share of its area is inside.
pub const MIN_INSIDE_FRACTION: f64 = 0.5;

/// Square crop of a parent image.
#[derive(Clone, Debug)]
pub struct Tile {
    pub parent_id: String,
    pub origin: (u32, u32),
    pub size: u32,
    pub pixels: Pixels,
    pub pad_fraction: f64,
}

impl Tile {
    /// Stable patch identifier, `<image_id>@<x0>_<y0>`.
    pub fn id(&self) -> String {
        format!("{}@{}_{}", self.parent_id, self.origin.0, self.origin.1)
    }

    pub fn bounds(&self) -> PixelBox {
        let (x, y) = (self.origin.0 as f64, self.origin.1 as f64);
        PixelBox::new(x, y, x + self.size as f64, y + self.size as f64)
    }
}

fn axis_origins(dim: u32, size: u32, stride: u32) -> Vec<u32> {
    if dim <= size {
        return vec![0];
    }
    let last = dim - size;
    let mut v: Vec<u32> = (0..).map(|k| k * stride).take_while(|&o| o < last).collect();
    v.push(last);
    v
}

/// Tile origins `(x0, y0)` sorted by row then column. Edge tiles are shifted
/// inward so they end exactly on the image border.
pub fn tile_plan(
    width: u32,
    height: u32,
    size: u32,
    overlap: u32,
) -> Result<Vec<(u32, u32)>, RasterError> {
    if size == 0 || size <= overlap {
        return Err(RasterError::Config { size, overlap });
    }
    let stride = size - overlap;
    let xs = axis_origins(width, size, stride);
    let ys = axis_origins(height, size, stride);
    Ok(ys
        .iter()
        .flat_map(|&y| xs.iter().map(move |&x| (x, y)))
        .collect())
}

/// Copy a `size x size` tile; anything outside the parent is zero.
pub fn extract_tile(bundle: &RasterBundle, origin: (u32, u32), size: u32) -> Tile {
    let pixels = bundle
        .pixels()
        .crop_padded(origin.0 as i64, origin.1 as i64, size, size);
    let inside_w = bundle.width().saturating_sub(origin.0).min(size) as f64;
    let inside_h = bundle.height().saturating_sub(origin.1).min(size) as f64;
    let total = size as f64 * size as f64;
    Tile {
        parent_id: bundle.id().to_string(),
        origin,
        size,
        pixels,
        pad_fraction: if total > 0.0 {
            1.0 - inside_w * inside_h / total
        } else {
            0.0
        },
    }
}

/// Boxes with at least half their area inside the tile, moved into tile
/// coordinates and clipped to it.
pub fn clip_boxes_to_tile(tile: &Tile, boxes: &[AnnotationBox]) -> Vec<AnnotationBox> {
    clip_boxes_to_window(tile.origin, tile.size, boxes)
}

/// [`clip_boxes_to_tile`] for a square window given by origin and size.
pub fn clip_boxes_to_window(origin: (u32, u32), size: u32, boxes: &[AnnotationBox]) -> Vec<AnnotationBox> {
    let (ox, oy) = (origin.0 as f64, origin.1 as f64);
    let bounds = PixelBox::new(ox, oy, ox + size as f64, oy + size as f64);
    boxes
        .iter()
        .filter_map(|b| {
            let area = b.bbox.area();
            let inside = b.bbox.intersection(&bounds)?;
            if area <= 0.0 || inside.area() < MIN_INSIDE_FRACTION * area {
                return None;
            }
            let mut out = b.clone();
            out.bbox = inside.translate(-ox, -oy);
            Some(out)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{Provider, SampleDepth, Sidecar};
    use proptest::prelude::*;

    fn bundle(w: u32, h: u32) -> RasterBundle {
        let mut px = Pixels::new(w, h, 1, SampleDepth::Eight);
        for y in 0..h {
            for x in 0..w {
                px.set_all(x, y, ((x * 7 + y * 13) % 251) as u16);
            }
        }
        let sc = Sidecar {
            epsg: 32610,
            transform: [3.0, 0.0, 560000.0, 0.0, -3.0, 4190000.0],
            width: w,
            height: h,
            timestamp: "2023-06-01T18:30:00Z".into(),
            provider: Provider::Planet,
            gsd_m: 3.0,
            bands: None,
        };
        RasterBundle::new("img", px, sc, None).unwrap()
    }

    fn ann(b: PixelBox) -> AnnotationBox {
        AnnotationBox::auto("img", Some(1), b, 300.0)
    }

    #[test]
    fn plan_examples() {
        assert_eq!(tile_plan(800, 800, 800, 200).unwrap(), vec![(0, 0)]);
        assert_eq!(tile_plan(1400, 800, 800, 200).unwrap(), vec![(0, 0), (600, 0)]);
        let p = tile_plan(2000, 2000, 800, 200).unwrap();
        assert_eq!(p.len(), 9);
        assert_eq!(p[8], (1200, 1200));
        assert_eq!(tile_plan(700, 300, 800, 200).unwrap(), vec![(0, 0)]);
        assert!(tile_plan(10, 10, 200, 200).is_err());
    }

    #[test]
    fn consecutive_tiles_overlap_by_200() {
        // 3 strides + one tile: every neighbour pair overlaps by exactly size - stride
        let p = tile_plan(3 * 600 + 800, 800, 800, 200).unwrap();
        let xs: Vec<u32> = p.iter().map(|o| o.0).collect();
        assert_eq!(xs, vec![0, 600, 1200, 1800]);
        for w in xs.windows(2) {
            assert_eq!(w[0] + 800 - w[1], 200);
        }
    }

    #[test]
    fn coverage_brute_force() {
        for dim in (1..=2000).step_by(37).chain([599, 600, 601, 800, 801, 1399, 1400, 1401, 2000]) {
            let plan = tile_plan(dim, 1, 800, 200).unwrap();
            let mut covered = vec![false; dim as usize];
            for (x, _) in &plan {
                assert!(*x == 0 || x + 800 <= dim);
                for c in covered.iter_mut().skip(*x as usize).take(800) {
                    *c = true;
                }
            }
            assert!(covered.iter().all(|&c| c), "dim {dim}");
            let mut sorted = plan.clone();
            sorted.sort_by_key(|o| (o.1, o.0));
            sorted.dedup();
            assert_eq!(sorted, plan);
        }
    }

    #[test]
    fn extract_pads_small_images() {
        let b = bundle(700, 700);
        let t = extract_tile(&b, (0, 0), 800);
        assert_eq!(t.pad_fraction, 0.234375);
        assert_eq!(t.pixels.pixel(0, 0), b.pixels().pixel(0, 0));
        assert_eq!(t.pixels.pixel(750, 10), &[0]);
        let b = bundle(1400, 900);
        let t = extract_tile(&b, (600, 100), 800);
        assert_eq!(t.pad_fraction, 0.0);
        assert_eq!(t.pixels.pixel(0, 0), b.pixels().pixel(600, 100));
        assert_eq!(t.pixels.pixel(799, 799), b.pixels().pixel(1399, 899));
        assert_eq!(t.id(), "img@600_100");
    }

    #[test]
    fn half_inside_rule() {
        let b = bundle(1400, 800);
        let tiles: Vec<Tile> = tile_plan(1400, 800, 800, 200)
            .unwrap()
            .into_iter()
            .map(|o| extract_tile(&b, o, 800))
            .collect();
        let inside = ann(PixelBox::new(10.0, 10.0, 50.0, 60.0));
        let kept = clip_boxes_to_tile(&tiles[0], std::slice::from_ref(&inside));
        assert_eq!(kept[0].bbox, inside.bbox);
        // exactly half across the right edge of the first tile
        let half = ann(PixelBox::new(780.0, 100.0, 820.0, 140.0));
        let kept = clip_boxes_to_tile(&tiles[0], std::slice::from_ref(&half));
        assert_eq!(kept[0].bbox, PixelBox::new(780.0, 100.0, 800.0, 140.0));
        assert_eq!(kept[0].length_m, 300.0);
        // 60% inside the first tile, 100% in the overlap for the second
        let both = ann(PixelBox::new(776.0, 0.0, 816.0, 10.0));
        assert_eq!(clip_boxes_to_tile(&tiles[0], std::slice::from_ref(&both)).len(), 1);
        let second = clip_boxes_to_tile(&tiles[1], std::slice::from_ref(&both));
        assert_eq!(second[0].bbox, PixelBox::new(176.0, 0.0, 216.0, 10.0));
        let mostly_out = ann(PixelBox::new(790.0, 0.0, 830.0, 10.0));
        assert!(clip_boxes_to_tile(&tiles[0], &[mostly_out]).is_empty());
    }

    proptest! {
        #[test]
        fn plan_covers_2d(w in 1u32..2500, h in 1u32..2500) {
            let plan = tile_plan(w, h, 800, 200).unwrap();
            let xs: Vec<u32> = plan.iter().filter(|o| o.1 == 0).map(|o| o.0).collect();
            let ys: Vec<u32> = plan.iter().filter(|o| o.0 == 0).map(|o| o.1).collect();
            prop_assert_eq!(plan.len(), xs.len() * ys.len());
            for axis in [(&xs, w), (&ys, h)] {
                let mut end = 0;
                for &o in axis.0 {
                    prop_assert!(o <= end);
                    end = end.max(o + 800);
                }
                prop_assert!(end >= axis.1);
            }
        }

        #[test]
        fn every_half_inside_box_lands_somewhere(x in 0.0f64..1900.0, y in 0.0f64..1900.0, s in 1.0f64..150.0) {
            let bx = ann(PixelBox::new(x, y, (x + s).min(2000.0), (y + s).min(2000.0)));
            let hits: usize = tile_plan(2000, 2000, 800, 200)
                .unwrap()
                .into_iter()
                .map(|origin| {
                    let t = Tile {
                        parent_id: "img".into(),
                        origin,
                        size: 800,
                        pixels: Pixels::new(1, 1, 1, SampleDepth::Eight),
                        pad_fraction: 0.0,
                    };
                    clip_boxes_to_tile(&t, std::slice::from_ref(&bx)).len()
                })
                .sum();
            prop_assert!(hits >= 1);
        }
    }
}
