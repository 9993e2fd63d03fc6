//! Binary PGM (`P5`) and PPM (`P6`) support.
//!
//! Samples are scaled by `maxval` into `[0, 1]`. Files with `maxval > 255`
//! use two big-endian bytes per sample. Writing always produces 8-bit files.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::patch_grid::Image;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn error(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse {
                offset: start,
                message: format!("{what} out of range"),
            })
    }
}

pub fn decode_pnm(bytes: &[u8]) -> Result<Image> {
    let mut cur = Cursor { bytes, pos: 0 };
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        Some([b'P', d]) if d.is_ascii_digit() => {
            return Err(Error::UnsupportedFormat(format!(
                "P{} (only binary P5/P6 are supported)",
                *d as char
            )))
        }
        _ => return Err(cur.error("missing P5/P6 magic number")),
    };
    cur.pos = 2;
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(cur.error("image dimensions must be positive"));
    }
    if maxval == 0 || maxval > 65_535 {
        return Err(cur.error(format!("maxval {maxval} outside 1..=65535")));
    }
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(cur.error("expected a single whitespace byte after the header")),
    }

    let bytes_per_sample = if maxval > 255 { 2 } else { 1 };
    let samples = width * height * channels;
    let body = &bytes[cur.pos..];
    if body.len() < samples * bytes_per_sample {
        return Err(Error::Parse {
            offset: bytes.len(),
            message: format!(
                "truncated pixel data: expected {} bytes after offset {}, found {}",
                samples * bytes_per_sample,
                cur.pos,
                body.len()
            ),
        });
    }
    let scale = 1.0 / maxval as f64;
    let data = if bytes_per_sample == 1 {
        body[..samples].iter().map(|&b| (b as f64 * scale).min(1.0)).collect()
    } else {
        body[..samples * 2]
            .chunks_exact(2)
            .map(|c| (u16::from_be_bytes([c[0], c[1]]) as f64 * scale).min(1.0))
            .collect()
    };
    Image::new(height, width, channels, data)
}

pub fn encode_pnm(image: &Image) -> Result<Vec<u8>> {
    let magic = match image.channels() {
        1 => "P5",
        3 => "P6",
        c => return Err(Error::UnsupportedFormat(format!("{c} channels"))),
    };
    let mut out = format!("{magic}\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend(image.data().iter().map(|v| (v * 255.0).round() as u8));
    Ok(out)
}

pub fn load_image(path: &Path) -> Result<Image> {
    decode_pnm(&fs::read(path)?)
}

pub fn save_image(path: &Path, image: &Image) -> Result<()> {
    fs::write(path, encode_pnm(image)?)?;
    Ok(())
}
