use image::{ImageFormat, Rgb, RgbImage};
use shipmatch_core::catalog::keeps;
use shipmatch_core::correlate::AnnotationBox;
use std::io::Cursor;

/// Outline colour of annotations that survive curation.
pub const KEPT_COLOR: [u8; 3] = [0, 255, 0];
/// Outline colour of flagged or rejected annotations.
pub const DROPPED_COLOR: [u8; 3] = [255, 0, 0];

fn outline(img: &mut RgbImage, a: &AnnotationBox, color: Rgb<u8>) {
    let (w, h) = img.dimensions();
    if w == 0 || h == 0 {
        return;
    }
    let b = &a.bbox;
    let x0 = b.x_min.floor().clamp(0.0, (w - 1) as f64) as u32;
    let y0 = b.y_min.floor().clamp(0.0, (h - 1) as f64) as u32;
    let x1 = (b.x_max.ceil() - 1.0).clamp(x0 as f64, (w - 1) as f64) as u32;
    let y1 = (b.y_max.ceil() - 1.0).clamp(y0 as f64, (h - 1) as f64) as u32;
    for x in x0..=x1 {
        img.put_pixel(x, y0, color);
        img.put_pixel(x, y1, color);
    }
    for y in y0..=y1 {
        img.put_pixel(x0, y, color);
        img.put_pixel(x1, y, color);
    }
}

/// Decode a patch PNG, draw one-pixel outlines for every annotation (green
/// when kept, red when flagged or rejected) and re-encode as RGB PNG.
pub fn draw_overlay(png: &[u8], annotations: &[AnnotationBox]) -> Result<Vec<u8>, String> {
    let mut img = image::load_from_memory_with_format(png, ImageFormat::Png)
        .map_err(|e| format!("patch decode: {e}"))?
        .to_rgb8();
    for a in annotations {
        let c = if keeps(a) { KEPT_COLOR } else { DROPPED_COLOR };
        outline(&mut img, a, Rgb(c));
    }
    let mut out = Vec::new();
    img.write_to(&mut Cursor::new(&mut out), ImageFormat::Png)
        .map_err(|e| format!("overlay encode: {e}"))?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use shipmatch_core::geom::PixelBox;

    fn blank(w: u32, h: u32) -> Vec<u8> {
        let mut out = Vec::new();
        RgbImage::new(w, h).write_to(&mut Cursor::new(&mut out), ImageFormat::Png).unwrap();
        out
    }

    #[test]
    fn outline_lands_on_box_edges() {
        let kept = AnnotationBox::auto("i", Some(1), PixelBox::new(2.0, 3.0, 6.0, 8.0), 40.0);
        let mut flagged = AnnotationBox::auto("i", Some(2), PixelBox::new(10.0, 10.0, 12.5, 12.5), 40.0);
        flagged.set_cloud_fraction(0.9);
        let png = draw_overlay(&blank(16, 16), &[kept, flagged]).unwrap();
        let img = image::load_from_memory(&png).unwrap().to_rgb8();
        assert_eq!(img.get_pixel(2, 3).0, KEPT_COLOR);
        assert_eq!(img.get_pixel(5, 7).0, KEPT_COLOR);
        assert_eq!(img.get_pixel(4, 3).0, KEPT_COLOR);
        assert_eq!(img.get_pixel(4, 5).0, [0, 0, 0]);
        assert_eq!(img.get_pixel(6, 8).0, [0, 0, 0]);
        assert_eq!(img.get_pixel(12, 12).0, DROPPED_COLOR);
        assert_eq!(img.get_pixel(11, 11).0, [0, 0, 0]);
    }

    #[test]
    fn boxes_past_the_edge_are_clamped() {
        let a = AnnotationBox::auto("i", Some(1), PixelBox::new(0.0, 0.0, 100.0, 100.0), 40.0);
        let img = image::load_from_memory(&draw_overlay(&blank(8, 8), &[a]).unwrap()).unwrap().to_rgb8();
        assert_eq!(img.get_pixel(7, 7).0, KEPT_COLOR);
    }
}
