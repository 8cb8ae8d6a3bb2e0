//! Binary NetPBM (P5 graymap, P6 pixmap) with 8-bit samples.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImage {
    pub width: usize,
    pub height: usize,
    /// 1 for P5, 3 for P6.
    pub channels: usize,
    pub maxval: u16,
    /// Row-major, interleaved samples.
    pub data: Vec<u8>,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Cursor<'_> {
    fn err(&self, offset: usize, message: impl Into<String>) -> Error {
        Error::Decode {
            path: self.path.to_path_buf(),
            offset: offset as u64,
            message: message.into(),
        }
    }

    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    /// Parses an unsigned decimal; returns it with its starting offset.
    fn number(&mut self, what: &str) -> Result<(usize, usize)> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err(start, format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .expect("ascii digits")
            .parse()
            .map(|v| (v, start))
            .map_err(|_| self.err(start, format!("{what} out of range")))
    }
}

pub fn decode_pnm(bytes: &[u8], path: &Path) -> Result<RawImage> {
    let mut cur = Cursor { bytes, pos: 0, path };
    let channels = match bytes.get(0..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(cur.err(0, "not a binary PGM (P5) or PPM (P6) file")),
    };
    cur.pos = 2;
    if !bytes.get(2).is_some_and(|b| b.is_ascii_whitespace() || *b == b'#') {
        return Err(cur.err(2, "expected whitespace after magic number"));
    }
    let (width, width_at) = cur.number("width")?;
    let (height, _) = cur.number("height")?;
    let (maxval, maxval_at) = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(cur.err(width_at, format!("empty image {width}x{height}")));
    }
    if maxval == 0 || maxval > 255 {
        return Err(cur.err(maxval_at, format!("maxval {maxval} is not 8-bit")));
    }
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(cur.err(cur.pos, "expected single whitespace before raster")),
    }
    let len = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| cur.err(0, "image dimensions overflow"))?;
    let raster = &bytes[cur.pos..];
    if raster.len() < len {
        return Err(cur.err(bytes.len(), format!("truncated raster: need {len} bytes, found {}", raster.len())));
    }
    Ok(RawImage {
        width,
        height,
        channels,
        maxval: maxval as u16,
        data: raster[..len].to_vec(),
    })
}

/// Writes an 8-bit P5 (one channel) or P6 (three channels) file image.
pub fn encode_pnm(img: &RawImage) -> Vec<u8> {
    let magic = if img.channels == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n{}\n", img.width, img.height, img.maxval).into_bytes();
    out.extend_from_slice(&img.data);
    out
}
