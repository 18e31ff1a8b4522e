use std::collections::HashMap;

use super::content::interpret_page;
use super::{images, Document, IngestError};

pub const DEFAULT_DPI: u32 = 200;
pub const MIN_DPI: u32 = 72;
pub const MAX_DPI: u32 = 600;

/// An 8-bit raster with 1 (gray) or 3 (RGB) interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    width: u32,
    height: u32,
    channels: u8,
    data: Vec<u8>,
    dpi: u32,
}

impl Raster {
    pub fn new(width: u32, height: u32, channels: u8, data: Vec<u8>, dpi: u32) -> Option<Raster> {
        let ok = matches!(channels, 1 | 3)
            && data.len() == width as usize * height as usize * channels as usize;
        ok.then_some(Raster {
            width,
            height,
            channels,
            data,
            dpi,
        })
    }

    pub fn filled(width: u32, height: u32, channels: u8, value: u8, dpi: u32) -> Option<Raster> {
        let len = width as usize * height as usize * channels as usize;
        Raster::new(width, height, channels, vec![value; len], dpi)
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

    pub fn dpi(&self) -> u32 {
        self.dpi
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: u32, y: u32) -> &[u8] {
        let c = self.channels as usize;
        let i = (y as usize * self.width as usize + x as usize) * c;
        &self.data[i..i + c]
    }

    /// Binary PGM (gray) or PPM (RGB), the lingua franca of OCR command lines.
    pub fn to_pnm(&self) -> Vec<u8> {
        let magic = if self.channels == 1 { "P5" } else { "P6" };
        let mut out = format!("{magic}\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }
}

pub(super) fn rasterize(doc: &Document, page_index: usize, dpi: u32) -> Result<Raster, IngestError> {
    let info = doc.page(page_index)?;
    if !(MIN_DPI..=MAX_DPI).contains(&dpi) {
        return Err(IngestError::InvalidDpi(dpi));
    }
    let mb = info.media_box;
    let scale = dpi as f64 / 72.0;
    let width = (mb.width() * scale).round() as u32;
    let height = (mb.height() * scale).round() as u32;
    if width == 0 || height == 0 {
        return Err(IngestError::RenderFailure(format!(
            "degenerate media box {:?}",
            mb
        )));
    }
    let mut raster = Raster::filled(width, height, 3, 255, dpi)
        .ok_or_else(|| IngestError::RenderFailure("raster allocation".into()))?;

    let lop = doc.lopdf();
    let content = interpret_page(lop, info.object);
    let mut decoded = HashMap::new();
    for placement in &content.placements {
        let img = decoded.entry(placement.object).or_insert_with(|| {
            images::decode_xobject(lop, placement.object)
                .ok()
                .and_then(|d| image::load_from_memory(&d.bytes).ok())
                .map(|i| i.to_rgb8())
        });
        let Some(img) = img else {
            log::warn!("page {page_index}: image {:?} not rendered", placement.object);
            continue;
        };
        let Some(inv) = invert(&placement.ctm) else { continue };
        // Device-space bounding box of the transformed unit square.
        let corners = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)].map(|(u, v)| {
            let (x, y) = placement.ctm.apply(u, v);
            ((x - mb.llx) * scale, (mb.ury - y) * scale)
        });
        let x0 = corners.iter().map(|c| c.0).fold(f64::INFINITY, f64::min).floor().max(0.0) as u32;
        let x1 = corners.iter().map(|c| c.0).fold(f64::NEG_INFINITY, f64::max).ceil().min(width as f64) as u32;
        let y0 = corners.iter().map(|c| c.1).fold(f64::INFINITY, f64::min).floor().max(0.0) as u32;
        let y1 = corners.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max).ceil().min(height as f64) as u32;
        let (iw, ih) = img.dimensions();
        for py in y0..y1 {
            for px in x0..x1 {
                let ux = mb.llx + (px as f64 + 0.5) / scale;
                let uy = mb.ury - (py as f64 + 0.5) / scale;
                let (u, v) = inv.apply(ux, uy);
                if !(0.0..1.0).contains(&u) || !(0.0..1.0).contains(&v) {
                    continue;
                }
                let sx = ((u * iw as f64) as u32).min(iw - 1);
                let sy = (((1.0 - v) * ih as f64) as u32).min(ih - 1);
                let src = img.get_pixel(sx, sy).0;
                let i = (py as usize * width as usize + px as usize) * 3;
                raster.data[i..i + 3].copy_from_slice(&src);
            }
        }
    }
    Ok(raster)
}

fn invert(m: &super::content::Matrix) -> Option<super::content::Matrix> {
    m.inverse()
}

/// Grayscale conversion followed by a 3×3 morphological gradient
/// (dilation minus erosion), which keeps strokes and edges and flattens
/// uniform regions to zero. Dimensions are unchanged; output is one channel.
pub fn preprocess_raster(r: &Raster) -> Raster {
    let gray = to_gray(r);
    let (w, h) = (r.width as usize, r.height as usize);
    let mut out = vec![0u8; w * h];
    for y in 0..h {
        let ys = y.saturating_sub(1)..=(y + 1).min(h - 1);
        for x in 0..w {
            let xs = x.saturating_sub(1)..=(x + 1).min(w - 1);
            let (mut lo, mut hi) = (u8::MAX, u8::MIN);
            for yy in ys.clone() {
                for &v in &gray[yy * w + *xs.start()..=yy * w + *xs.end()] {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            out[y * w + x] = hi - lo;
        }
    }
    Raster {
        width: r.width,
        height: r.height,
        channels: 1,
        data: out,
        dpi: r.dpi,
    }
}

/// Luma with weights 0.299/0.587/0.114, rounded to nearest.
pub(crate) fn to_gray(r: &Raster) -> Vec<u8> {
    match r.channels {
        1 => r.data.clone(),
        _ => r
            .data
            .chunks_exact(3)
            .map(|p| (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64).round() as u8)
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_raster_has_zero_gradient() {
        let r = Raster::filled(7, 5, 3, 123, 200).unwrap();
        let g = preprocess_raster(&r);
        assert_eq!(g.channels(), 1);
        assert_eq!((g.width(), g.height()), (7, 5));
        assert!(g.data().iter().all(|&v| v == 0));
    }

    #[test]
    fn single_white_pixel_lights_its_neighbourhood() {
        let mut data = vec![0u8; 25];
        data[2 * 5 + 2] = 255;
        let g = preprocess_raster(&Raster::new(5, 5, 1, data, 72).unwrap());
        // Oracle: dilation is 255 within Chebyshev distance 1 of (2,2) and 0
        // elsewhere; erosion is 0 everywhere.
        for y in 0..5i32 {
            for x in 0..5i32 {
                let near = (x - 2).abs() <= 1 && (y - 2).abs() <= 1;
                assert_eq!(g.pixel(x as u32, y as u32)[0], if near { 255 } else { 0 }, "({x},{y})");
            }
        }
    }

    #[test]
    fn gray_input_matches_replicated_rgb() {
        let gray: Vec<u8> = (0..48u32).map(|i| (i * 37 % 256) as u8).collect();
        let rgb: Vec<u8> = gray.iter().flat_map(|&v| [v, v, v]).collect();
        let a = preprocess_raster(&Raster::new(8, 6, 1, gray, 72).unwrap());
        let b = preprocess_raster(&Raster::new(8, 6, 3, rgb, 72).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn luma_rounding() {
        let r = Raster::new(1, 1, 3, vec![255, 0, 0], 72).unwrap();
        assert_eq!(to_gray(&r), vec![76]); // 76.245
        let r = Raster::new(1, 1, 3, vec![0, 255, 0], 72).unwrap();
        assert_eq!(to_gray(&r), vec![150]); // 149.685
    }

    #[test]
    fn raster_rejects_bad_lengths() {
        assert!(Raster::new(2, 2, 3, vec![0; 11], 72).is_none());
        assert!(Raster::new(2, 2, 2, vec![0; 8], 72).is_none());
    }
}
