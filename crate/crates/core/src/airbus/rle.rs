use super::AirbusError;
use crate::raster::BinaryMask;

/// Side of an Airbus image.
pub const AIRBUS_SIZE: u32 = 768;

/// Column-major, 1-indexed run-length mask over a `width x height` grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RleMask {
    pub width: u32,
    pub height: u32,
    /// `(start, length)`, sorted, non-overlapping, non-touching.
    pub runs: Vec<(u64, u64)>,
}

impl RleMask {
    /// Parse a run string for a square 768 grid.
    pub fn parse(text: &str) -> Result<RleMask, AirbusError> {
        RleMask::parse_shape(text, AIRBUS_SIZE, AIRBUS_SIZE)
    }

    pub fn parse_shape(text: &str, width: u32, height: u32) -> Result<RleMask, AirbusError> {
        let tokens: Vec<&str> = text.split_ascii_whitespace().collect();
        if !tokens.len().is_multiple_of(2) {
            return Err(AirbusError::Rle("odd number of tokens".into()));
        }
        let total = width as u64 * height as u64;
        let mut runs = Vec::with_capacity(tokens.len() / 2);
        for pair in tokens.chunks_exact(2) {
            let num = |t: &str| -> Result<u64, AirbusError> {
                t.parse::<u64>()
                    .ok()
                    .filter(|&v| v > 0)
                    .ok_or_else(|| AirbusError::Rle(format!("token {t:?} is not a positive integer")))
            };
            let (start, len) = (num(pair[0])?, num(pair[1])?);
            if start.checked_add(len - 1).is_none_or(|end| end > total) {
                return Err(AirbusError::Rle(format!("run {start}+{len} exceeds {total} pixels")));
            }
            runs.push((start, len));
        }
        runs.sort_unstable();
        let mut merged: Vec<(u64, u64)> = Vec::with_capacity(runs.len());
        for (s, l) in runs {
            match merged.last_mut() {
                Some((ps, pl)) if *ps + *pl > s => {
                    return Err(AirbusError::Rle(format!("run at {s} overlaps run at {ps}")));
                }
                Some((ps, pl)) if *ps + *pl == s => *pl += l,
                _ => merged.push((s, l)),
            }
        }
        Ok(RleMask {
            width,
            height,
            runs: merged,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    pub fn pixel_count(&self) -> u64 {
        self.runs.iter().map(|r| r.1).sum()
    }

    /// Vertical segments `(col, row_start, row_end_exclusive)`.
    pub fn segments(&self) -> impl Iterator<Item = (u32, u32, u32)> + '_ {
        let h = self.height as u64;
        self.runs.iter().flat_map(move |&(start, len)| {
            let mut out = Vec::new();
            let mut p = start - 1;
            let end = start - 1 + len;
            while p < end {
                let col = p / h;
                let row = p % h;
                let take = (h - row).min(end - p);
                out.push((col as u32, row as u32, (row + take) as u32));
                p += take;
            }
            out
        })
    }

    pub fn to_mask(&self) -> BinaryMask {
        let mut m = BinaryMask::new(self.width, self.height);
        for (col, r0, r1) in self.segments() {
            for row in r0..r1 {
                m.set(col, row, true);
            }
        }
        m
    }

    pub fn from_mask(mask: &BinaryMask) -> RleMask {
        let (w, h) = (mask.width(), mask.height());
        let mut runs: Vec<(u64, u64)> = Vec::new();
        let mut p = 0u64;
        for col in 0..w {
            for row in 0..h {
                p += 1;
                if mask.get(col, row) {
                    match runs.last_mut() {
                        Some((s, l)) if *s + *l == p => *l += 1,
                        _ => runs.push((p, 1)),
                    }
                }
            }
        }
        RleMask {
            width: w,
            height: h,
            runs,
        }
    }

    pub fn encode(&self) -> String {
        let mut s = String::new();
        for (i, (a, b)) in self.runs.iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            s.push_str(&format!("{a} {b}"));
        }
        s
    }
}

/// Decode a 768x768 Airbus run string.
pub fn decode_rle(text: &str) -> Result<BinaryMask, AirbusError> {
    Ok(RleMask::parse(text)?.to_mask())
}

/// Canonical run string of a mask.
pub fn encode_rle(mask: &BinaryMask) -> String {
    RleMask::from_mask(mask).encode()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn column_major_one_indexed() {
        let m = decode_rle("1 3").unwrap();
        assert!(m.get(0, 0) && m.get(0, 1) && m.get(0, 2));
        assert!(!m.get(0, 3) && !m.get(1, 0));
        assert_eq!(m.count(), 3);
        let m = decode_rle("769 2").unwrap();
        assert!(m.get(1, 0) && m.get(1, 1));
        assert!(decode_rle("").unwrap().is_empty());
        // a run wrapping into the next column
        let m = decode_rle("768 2").unwrap();
        assert!(m.get(0, 767) && m.get(1, 0));
    }

    #[test]
    fn rejects_malformed() {
        assert!(decode_rle("1").is_err());
        assert!(decode_rle("1 3 2 2").is_err());
        assert!(decode_rle("0 3").is_err());
        assert!(decode_rle("5 0").is_err());
        assert!(decode_rle("x 1").is_err());
        assert!(decode_rle("589824 1").is_ok());
        assert!(decode_rle("589824 2").is_err());
    }

    #[test]
    fn touching_runs_merge_to_canonical() {
        let r = RleMask::parse("4 2 1 3").unwrap();
        assert_eq!(r.runs, vec![(1, 5)]);
        assert_eq!(r.encode(), "1 5");
    }

    fn canonical_runs(w: u32, h: u32) -> impl Strategy<Value = String> {
        let total = (w * h) as u64;
        prop::collection::vec((1u64..6, 1u64..8), 0..12).prop_map(move |gaps| {
            let mut out = Vec::new();
            let mut p = 0u64;
            for (gap, len) in gaps {
                let start = p + gap;
                if start + len - 1 > total {
                    break;
                }
                out.push(format!("{start} {len}"));
                p = start + len;
            }
            out.join(" ")
        })
    }

    proptest! {
        #[test]
        fn round_trip(s in canonical_runs(9, 7)) {
            let r = RleMask::parse_shape(&s, 9, 7).unwrap();
            prop_assert_eq!(RleMask::from_mask(&r.to_mask()).encode(), s);
        }

        #[test]
        fn decode_matches_brute_force(s in canonical_runs(9, 7)) {
            let m = RleMask::parse_shape(&s, 9, 7).unwrap().to_mask();
            let toks: Vec<u64> = s.split_whitespace().map(|t| t.parse().unwrap()).collect();
            let mut set = std::collections::HashSet::new();
            for pair in toks.chunks(2) {
                for p in pair[0]..pair[0] + pair[1] {
                    set.insert(((p - 1) / 7, (p - 1) % 7));
                }
            }
            for c in 0..9u64 {
                for r in 0..7u64 {
                    prop_assert_eq!(m.get(c as u32, r as u32), set.contains(&(c, r)));
                }
            }
        }
    }
}
