//! Minimal PGM (P5) reading and writing.
//!
//! Inputs are 8-bit grayscale masks; outputs are 16-bit big-endian images
//! with maxval 65535 so that emitted files are lossless and bit-exactly
//! diffable.

use crate::error::{Error, Result};
use std::fs;
use std::io::Write;
use std::path::Path;

pub struct Pgm8 {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

fn input_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Input {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Read the PGM header: magic, width, height, maxval, honoring `#` comments.
fn parse_header(data: &[u8], path: &Path) -> Result<(usize, usize, usize, usize)> {
    if data.len() < 2 || &data[..2] != b"P5" {
        return Err(input_err(path, "not a binary PGM (missing P5 magic)"));
    }
    let mut fields = Vec::new();
    let mut pos = 2;
    while fields.len() < 3 && pos < data.len() {
        match data[pos] {
            b'#' => {
                while pos < data.len() && data[pos] != b'\n' {
                    pos += 1;
                }
            }
            c if c.is_ascii_whitespace() => pos += 1,
            _ => {
                let start = pos;
                while pos < data.len() && !data[pos].is_ascii_whitespace() {
                    pos += 1;
                }
                let tok = std::str::from_utf8(&data[start..pos])
                    .map_err(|_| input_err(path, "non-ASCII header"))?;
                let value: usize = tok
                    .parse()
                    .map_err(|_| input_err(path, format!("bad header token `{tok}`")))?;
                fields.push(value);
            }
        }
    }
    if fields.len() < 3 || pos >= data.len() {
        return Err(input_err(path, "truncated PGM header"));
    }
    pos += 1; // single whitespace byte after maxval
    Ok((fields[0], fields[1], fields[2], pos))
}

pub fn read_pgm8(path: &Path) -> Result<Pgm8> {
    let data = fs::read(path).map_err(|e| input_err(path, e.to_string()))?;
    let (width, height, maxval, offset) = parse_header(&data, path)?;
    if maxval != 255 {
        return Err(input_err(path, format!("expected 8-bit PGM (maxval 255), got maxval {maxval}")));
    }
    let need = width * height;
    let pixels = data[offset..].to_vec();
    if pixels.len() < need {
        return Err(input_err(path, format!("pixel data truncated: {} of {need} bytes", pixels.len())));
    }
    Ok(Pgm8 {
        width,
        height,
        pixels: pixels[..need].to_vec(),
    })
}

pub fn write_pgm8(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    assert_eq!(pixels.len(), width * height);
    let mut out = Vec::with_capacity(32 + pixels.len());
    write!(out, "P5\n{width} {height}\n255\n")?;
    out.extend_from_slice(pixels);
    fs::write(path, out)?;
    Ok(())
}

/// Write a real-valued image as 16-bit PGM, linearly mapping `[lo, hi]` to
/// `[0, 65535]`. Returns the `(lo, hi)` actually used so callers can record
/// the scaling in the run manifest.
pub fn write_pgm16_scaled(
    path: &Path,
    width: usize,
    height: usize,
    values: &[f64],
) -> Result<(f64, f64)> {
    assert_eq!(values.len(), width * height);
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scale = if hi > lo { 65535.0 / (hi - lo) } else { 0.0 };
    let mut out = Vec::with_capacity(32 + 2 * values.len());
    write!(out, "P5\n{width} {height}\n65535\n")?;
    for v in values {
        let q = ((v - lo) * scale).round().clamp(0.0, 65535.0) as u16;
        out.extend_from_slice(&q.to_be_bytes());
    }
    fs::write(path, out)?;
    Ok((lo, hi))
}
