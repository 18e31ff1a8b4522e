//! Minimal PNG container writing.
//!
//! PDF image streams compressed with the PNG predictors are exactly a PNG
//! IDAT payload, so an image can be re-wrapped into a PNG file without
//! touching the compressed data. The synthetic generator writes its PNGs with
//! the same single-IDAT layout, which makes extraction byte-exact.

use std::io::Write;

use flate2::write::ZlibEncoder;
use flate2::{Compression, Crc};

pub const SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', b'\r', b'\n', 0x1a, b'\n'];

/// PNG colour types used here.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColorType {
    Gray = 0,
    Rgb = 2,
}

impl ColorType {
    pub fn channels(self) -> usize {
        match self {
            ColorType::Gray => 1,
            ColorType::Rgb => 3,
        }
    }
}

fn chunk(out: &mut Vec<u8>, kind: &[u8; 4], data: &[u8]) {
    out.extend_from_slice(&(data.len() as u32).to_be_bytes());
    out.extend_from_slice(kind);
    out.extend_from_slice(data);
    let mut crc = Crc::new();
    crc.update(kind);
    crc.update(data);
    out.extend_from_slice(&crc.sum().to_be_bytes());
}

/// Wraps an already-compressed IDAT payload (8 bits per sample, no interlace).
pub fn wrap_idat(width: u32, height: u32, color: ColorType, idat: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(idat.len() + 64);
    out.extend_from_slice(&SIGNATURE);
    let mut ihdr = Vec::with_capacity(13);
    ihdr.extend_from_slice(&width.to_be_bytes());
    ihdr.extend_from_slice(&height.to_be_bytes());
    ihdr.extend_from_slice(&[8, color as u8, 0, 0, 0]);
    chunk(&mut out, b"IHDR", &ihdr);
    chunk(&mut out, b"IDAT", idat);
    chunk(&mut out, b"IEND", &[]);
    out
}

/// Compresses raw samples into an IDAT payload, filter type 0 on every row.
pub fn compress_rows(width: u32, height: u32, color: ColorType, pixels: &[u8]) -> Vec<u8> {
    let row = width as usize * color.channels();
    debug_assert_eq!(pixels.len(), row * height as usize);
    let mut enc = ZlibEncoder::new(Vec::new(), Compression::new(6));
    for r in pixels.chunks(row) {
        // Writing into a Vec cannot fail.
        enc.write_all(&[0]).expect("in-memory write");
        enc.write_all(r).expect("in-memory write");
    }
    enc.finish().expect("in-memory write")
}

/// Encodes raw 8-bit samples as a PNG file.
pub fn encode(width: u32, height: u32, color: ColorType, pixels: &[u8]) -> Vec<u8> {
    wrap_idat(width, height, color, &compress_rows(width, height, color, pixels))
}

/// Splits a PNG file into its IHDR fields and concatenated IDAT payload.
pub fn split(png: &[u8]) -> Option<(u32, u32, ColorType, Vec<u8>)> {
    if png.len() < 8 || png[..8] != SIGNATURE {
        return None;
    }
    let mut pos = 8;
    let mut header = None;
    let mut idat = Vec::new();
    while pos + 8 <= png.len() {
        let len = u32::from_be_bytes(png[pos..pos + 4].try_into().ok()?) as usize;
        let kind = &png[pos + 4..pos + 8];
        let data = png.get(pos + 8..pos + 8 + len)?;
        match kind {
            b"IHDR" if len == 13 => {
                let w = u32::from_be_bytes(data[0..4].try_into().ok()?);
                let h = u32::from_be_bytes(data[4..8].try_into().ok()?);
                let color = match (data[8], data[9], data[12]) {
                    (8, 0, 0) => ColorType::Gray,
                    (8, 2, 0) => ColorType::Rgb,
                    _ => return None,
                };
                header = Some((w, h, color));
            }
            b"IDAT" => idat.extend_from_slice(data),
            b"IEND" => break,
            _ => {}
        }
        pos += 12 + len;
    }
    let (w, h, c) = header?;
    Some((w, h, c, idat))
}
