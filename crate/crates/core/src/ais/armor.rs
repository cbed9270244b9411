use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ArmorError {
    #[error("invalid armor character {ch:?} at offset {offset}")]
    InvalidChar { offset: usize, ch: char },
    #[error("fill bits {fill} invalid for a payload of {bits} bits")]
    InvalidFill { fill: u8, bits: usize },
}

/// A decoded AIS payload as a sequence of bits, most significant first.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Bits(Vec<bool>);

impl Bits {
    pub fn from_bools(bits: Vec<bool>) -> Self {
        Bits(bits)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    /// Unsigned field of `width` bits starting at `start`. `None` past the end.
    pub fn uint(&self, start: usize, width: usize) -> Option<u64> {
        debug_assert!(width <= 64);
        let field = self.0.get(start..start.checked_add(width)?)?;
        Some(field.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64))
    }

    /// Two's-complement signed field.
    pub fn int(&self, start: usize, width: usize) -> Option<i64> {
        let raw = self.uint(start, width)?;
        if width == 0 {
            return Some(0);
        }
        let sign = 1u64 << (width - 1);
        Some(if raw & sign != 0 {
            raw as i64 - (1i64 << width)
        } else {
            raw as i64
        })
    }

    /// Six-bit ASCII text of `chars` characters, right-trimmed of '@' and spaces.
    pub fn text(&self, start: usize, chars: usize) -> Option<String> {
        let mut s = String::with_capacity(chars);
        for i in 0..chars {
            let v = self.uint(start + 6 * i, 6)? as u8;
            s.push(if v < 32 { (v + 64) as char } else { v as char });
        }
        Some(s.trim_end_matches(['@', ' ']).to_string())
    }
}

fn unarmor(c: u8) -> Option<u8> {
    match c {
        48..=87 => Some(c - 48),
        96..=119 => Some(c - 56),
        _ => None,
    }
}

/// Decode a 6-bit armored payload, dropping the trailing `fill_bits`.
pub fn decode_payload(payload: &str, fill_bits: u8) -> Result<Bits, ArmorError> {
    let mut bits = Vec::with_capacity(payload.len() * 6);
    for (offset, ch) in payload.char_indices() {
        let v = u8::try_from(ch)
            .ok()
            .and_then(unarmor)
            .ok_or(ArmorError::InvalidChar { offset, ch })?;
        bits.extend((0..6).rev().map(|k| (v >> k) & 1 == 1));
    }
    if fill_bits > 5 || fill_bits as usize > bits.len() {
        return Err(ArmorError::InvalidFill {
            fill: fill_bits,
            bits: bits.len(),
        });
    }
    bits.truncate(bits.len() - fill_bits as usize);
    Ok(Bits(bits))
}
