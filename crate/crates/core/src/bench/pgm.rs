//! 8-bit grayscale PGM (P2 plain, P5 binary).
//!
//! Pixels load as `value / maxval` in `[0, 1]`. Saving clamps to `[0, 1]`,
//! scales by 255 and rounds halves up, always as P5.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    line: usize,
}

impl Cursor<'_> {
    /// Skips whitespace and `#` comments.
    fn skip_blank(&mut self) {
        while let Some(&c) = self.bytes.get(self.pos) {
            if c == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    if c == b'\n' {
                        break;
                    }
                    self.pos += 1;
                }
            } else if c.is_ascii_whitespace() {
                if c == b'\n' {
                    self.line += 1;
                }
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Option<&[u8]> {
        self.skip_blank();
        let start = self.pos;
        while self.pos < self.bytes.len()
            && !self.bytes[self.pos].is_ascii_whitespace()
            && self.bytes[self.pos] != b'#'
        {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.bytes[start..self.pos])
    }
}

/// Parses PGM bytes; `origin` only labels errors.
pub fn parse_pgm(bytes: &[u8], origin: &Path) -> Result<DenseMatrix> {
    let mut cur = Cursor {
        bytes,
        pos: 0,
        line: 1,
    };
    let err = |line: usize, msg: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        msg,
    };
    let binary = match cur.token() {
        Some(b"P2") => false,
        Some(b"P5") => true,
        Some(other) => {
            return Err(err(1, format!("not a grayscale PGM (magic {:?})", String::from_utf8_lossy(other))))
        }
        None => return Err(err(1, "empty file".into())),
    };
    let mut header = [0usize; 3];
    for (slot, name) in header.iter_mut().zip(["width", "height", "maxval"]) {
        let line = cur.line;
        let tok = cur
            .token()
            .ok_or_else(|| err(line, format!("missing {name}")))?;
        *slot = std::str::from_utf8(tok)
            .ok()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| err(line, format!("bad {name} {:?}", String::from_utf8_lossy(tok))))?;
    }
    let [width, height, maxval] = header;
    if !(1..=255).contains(&maxval) {
        return Err(err(cur.line, format!("maxval {maxval} is not 8-bit")));
    }
    let count = width * height;
    let mut pixels = Vec::with_capacity(count);
    if binary {
        // exactly one whitespace byte separates the header from the raster
        let start = cur.pos + 1;
        let raster = bytes
            .get(start..start + count)
            .ok_or_else(|| err(cur.line, format!("raster truncated, expected {count} bytes")))?;
        pixels.extend(raster.iter().map(|&v| v as usize));
    } else {
        for k in 0..count {
            let line = cur.line;
            let tok = cur
                .token()
                .ok_or_else(|| err(line, format!("raster truncated after {k} of {count} values")))?;
            let v: usize = std::str::from_utf8(tok)
                .ok()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| err(line, format!("bad pixel {:?}", String::from_utf8_lossy(tok))))?;
            pixels.push(v);
        }
    }
    if let Some(v) = pixels.iter().find(|&&v| v > maxval) {
        return Err(err(cur.line, format!("pixel {v} exceeds maxval {maxval}")));
    }
    let scale = maxval as f64;
    DenseMatrix::from_vec(height, width, pixels.into_iter().map(|v| v as f64 / scale).collect())
}

pub fn load_grayscale(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let path = path.as_ref();
    parse_pgm(&fs::read(path)?, path)
}

/// P5 encoding of `m` with maxval 255.
pub fn encode_pgm(m: &DenseMatrix) -> Vec<u8> {
    let (h, w) = m.shape();
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend(m.as_slice().iter().map(|&v| {
        let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        (v * 255.0 + 0.5).floor() as u8
    }));
    out
}

pub fn save_grayscale(m: &DenseMatrix, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_pgm(m))?;
    Ok(())
}
