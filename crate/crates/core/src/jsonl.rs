//! JSON-lines helpers shared by every on-disk record stream.

use serde::de::DeserializeOwned;
use serde::Serialize;
use std::io::{self, BufRead, Write};

pub fn write_lines<T: Serialize, W: Write>(mut out: W, items: &[T]) -> io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Read every line as `T`. Blank lines are skipped.
pub fn read_lines<T: DeserializeOwned, R: BufRead>(input: R) -> io::Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| {
            io::Error::new(io::ErrorKind::InvalidData, format!("line {}: {e}", i + 1))
        })?;
        out.push(item);
    }
    Ok(out)
}
