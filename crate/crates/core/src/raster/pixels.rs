use image::{DynamicImage, ImageBuffer, Luma, LumaA, Rgb, Rgba};
use serde::{Deserialize, Serialize};
use std::io::Cursor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampleDepth {
    Eight,
    Sixteen,
}

impl SampleDepth {
    pub fn max_value(self) -> u16 {
        match self {
            SampleDepth::Eight => u8::MAX as u16,
            SampleDepth::Sixteen => u16::MAX,
        }
    }
}

/// Interleaved 1-4 channel image with 8- or 16-bit samples.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pixels {
    width: u32,
    height: u32,
    channels: u8,
    depth: SampleDepth,
    data: Vec<u16>,
}

impl Pixels {
    pub fn new(width: u32, height: u32, channels: u8, depth: SampleDepth) -> Self {
        assert!((1..=4).contains(&channels), "1-4 channels supported");
        Pixels {
            width,
            height,
            channels,
            depth,
            data: vec![0; width as usize * height as usize * channels as usize],
        }
    }

    pub fn from_data(
        width: u32,
        height: u32,
        channels: u8,
        depth: SampleDepth,
        data: Vec<u16>,
    ) -> Option<Self> {
        let ok = (1..=4).contains(&channels)
            && data.len() == width as usize * height as usize * channels as usize
            && data.iter().all(|&v| v <= depth.max_value());
        ok.then_some(Pixels {
            width,
            height,
            channels,
            depth,
            data,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn depth(&self) -> SampleDepth {
        self.depth
    }

    pub fn data(&self) -> &[u16] {
        &self.data
    }

    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * self.channels as usize
    }

    pub fn pixel(&self, x: u32, y: u32) -> &[u16] {
        let o = self.offset(x, y);
        &self.data[o..o + self.channels as usize]
    }

    pub fn pixel_mut(&mut self, x: u32, y: u32) -> &mut [u16] {
        let o = self.offset(x, y);
        let c = self.channels as usize;
        &mut self.data[o..o + c]
    }

    pub fn set_all(&mut self, x: u32, y: u32, value: u16) {
        self.pixel_mut(x, y).fill(value);
    }

    /// Copy a `w x h` window whose top-left is `(x0, y0)`; samples outside
    /// the source are zero.
    pub fn crop_padded(&self, x0: i64, y0: i64, w: u32, h: u32) -> Pixels {
        let mut out = Pixels::new(w, h, self.channels, self.depth);
        let c = self.channels as usize;
        for ty in 0..h {
            let sy = y0 + ty as i64;
            if sy < 0 || sy >= self.height as i64 {
                continue;
            }
            let sx0 = x0.max(0);
            let sx1 = (x0 + w as i64).min(self.width as i64);
            if sx0 >= sx1 {
                continue;
            }
            let src = self.offset(sx0 as u32, sy as u32);
            let dst = out.offset((sx0 - x0) as u32, ty);
            let n = (sx1 - sx0) as usize * c;
            out.data[dst..dst + n].copy_from_slice(&self.data[src..src + n]);
        }
        out
    }

    /// Per-pixel luminance (Rec. 601 weights for colour, first channel for
    /// grey or grey+alpha), in sample units.
    pub fn luminance(&self) -> Vec<f64> {
        let c = self.channels as usize;
        self.data
            .chunks_exact(c)
            .map(|p| match c {
                1 | 2 => p[0] as f64,
                _ => 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64,
            })
            .collect()
    }

    pub fn from_dynamic(img: DynamicImage) -> Result<Pixels, String> {
        let (w, h) = (img.width(), img.height());
        let wide = |v: Vec<u8>| v.into_iter().map(u16::from).collect::<Vec<_>>();
        let (channels, depth, data) = match img {
            DynamicImage::ImageLuma8(b) => (1, SampleDepth::Eight, wide(b.into_raw())),
            DynamicImage::ImageLumaA8(b) => (2, SampleDepth::Eight, wide(b.into_raw())),
            DynamicImage::ImageRgb8(b) => (3, SampleDepth::Eight, wide(b.into_raw())),
            DynamicImage::ImageRgba8(b) => (4, SampleDepth::Eight, wide(b.into_raw())),
            DynamicImage::ImageLuma16(b) => (1, SampleDepth::Sixteen, b.into_raw()),
            DynamicImage::ImageLumaA16(b) => (2, SampleDepth::Sixteen, b.into_raw()),
            DynamicImage::ImageRgb16(b) => (3, SampleDepth::Sixteen, b.into_raw()),
            DynamicImage::ImageRgba16(b) => (4, SampleDepth::Sixteen, b.into_raw()),
            other => return Err(format!("unsupported sample format {:?}", other.color())),
        };
        Ok(Pixels {
            width: w,
            height: h,
            channels,
            depth,
            data,
        })
    }

    pub fn to_dynamic(&self) -> DynamicImage {
        let (w, h) = (self.width, self.height);
        match self.depth {
            SampleDepth::Eight => {
                let d: Vec<u8> = self.data.iter().map(|&v| v as u8).collect();
                match self.channels {
                    1 => DynamicImage::ImageLuma8(ImageBuffer::<Luma<u8>, _>::from_raw(w, h, d).expect("size")),
                    2 => DynamicImage::ImageLumaA8(ImageBuffer::<LumaA<u8>, _>::from_raw(w, h, d).expect("size")),
                    3 => DynamicImage::ImageRgb8(ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, d).expect("size")),
                    _ => DynamicImage::ImageRgba8(ImageBuffer::<Rgba<u8>, _>::from_raw(w, h, d).expect("size")),
                }
            }
            SampleDepth::Sixteen => {
                let d = self.data.clone();
                match self.channels {
                    1 => DynamicImage::ImageLuma16(ImageBuffer::<Luma<u16>, _>::from_raw(w, h, d).expect("size")),
                    2 => DynamicImage::ImageLumaA16(ImageBuffer::<LumaA<u16>, _>::from_raw(w, h, d).expect("size")),
                    3 => DynamicImage::ImageRgb16(ImageBuffer::<Rgb<u16>, _>::from_raw(w, h, d).expect("size")),
                    _ => DynamicImage::ImageRgba16(ImageBuffer::<Rgba<u16>, _>::from_raw(w, h, d).expect("size")),
                }
            }
        }
    }

    pub fn encode_png(&self) -> Vec<u8> {
        let mut buf = Cursor::new(Vec::new());
        self.to_dynamic()
            .write_to(&mut buf, image::ImageFormat::Png)
            .expect("in-memory PNG encoding");
        buf.into_inner()
    }

    pub fn decode(bytes: &[u8]) -> Result<Pixels, String> {
        let img = image::load_from_memory(bytes).map_err(|e| e.to_string())?;
        Pixels::from_dynamic(img)
    }
}

/// Per-band linear window used to map 16-bit samples to 8-bit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StretchWindow {
    pub low: u16,
    pub high: u16,
}

/// Window each band to 8 bits between its `lo_pct` and `hi_pct` percentiles.
/// 8-bit input is returned unchanged with identity windows.
pub fn percentile_stretch(src: &Pixels, lo_pct: f64, hi_pct: f64) -> (Pixels, Vec<StretchWindow>) {
    let c = src.channels as usize;
    if src.depth == SampleDepth::Eight {
        return (src.clone(), vec![StretchWindow { low: 0, high: 255 }; c]);
    }
    let n = src.width as usize * src.height as usize;
    let mut windows = Vec::with_capacity(c);
    for band in 0..c {
        let mut hist = vec![0u64; 65536];
        for p in src.data.chunks_exact(c) {
            hist[p[band] as usize] += 1;
        }
        let quantile = |pct: f64| -> u16 {
            if n == 0 {
                return 0;
            }
            let target = ((pct / 100.0) * (n as f64 - 1.0)).round() as u64;
            let mut acc = 0u64;
            for (v, &count) in hist.iter().enumerate() {
                acc += count;
                if acc > target {
                    return v as u16;
                }
            }
            u16::MAX
        };
        windows.push(StretchWindow {
            low: quantile(lo_pct),
            high: quantile(hi_pct),
        });
    }
    let mut out = Pixels::new(src.width, src.height, src.channels, SampleDepth::Eight);
    for (dst, s) in out.data.chunks_exact_mut(c).zip(src.data.chunks_exact(c)) {
        for band in 0..c {
            let StretchWindow { low, high } = windows[band];
            let v = s[band];
            dst[band] = if high <= low {
                if v > low {
                    255
                } else {
                    0
                }
            } else {
                let t = (v as f64 - low as f64) / (high as f64 - low as f64);
                (t.clamp(0.0, 1.0) * 255.0).round() as u16
            };
        }
    }
    (out, windows)
}

/// Binary plane, 1 = cloud / unusable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32) -> Self {
        BinaryMask {
            width,
            height,
            data: vec![false; width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        let w = self.width as usize;
        self.data[y as usize * w + x as usize] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    /// Fill the half-open rectangle `[x0, x1) x [y0, y1)`, clipped to the plane.
    pub fn fill_rect(&mut self, x0: u32, y0: u32, x1: u32, y1: u32) {
        for y in y0..y1.min(self.height) {
            for x in x0..x1.min(self.width) {
                self.set(x, y, true);
            }
        }
    }

    /// Any non-zero sample in the first channel counts as set.
    pub fn from_pixels(p: &Pixels) -> BinaryMask {
        let c = p.channels as usize;
        BinaryMask {
            width: p.width,
            height: p.height,
            data: p.data.chunks_exact(c).map(|px| px[0] != 0).collect(),
        }
    }

    /// 8-bit single channel, 0 / 255.
    pub fn to_pixels(&self) -> Pixels {
        Pixels {
            width: self.width,
            height: self.height,
            channels: 1,
            depth: SampleDepth::Eight,
            data: self.data.iter().map(|&b| if b { 255 } else { 0 }).collect(),
        }
    }
}
