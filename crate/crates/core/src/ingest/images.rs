use std::collections::HashSet;
use std::io::Read;

use flate2::read::ZlibDecoder;
use lopdf::{Dictionary, Object, ObjectId, Stream};
use serde::{Deserialize, Serialize};

use super::content::{interpret_page, Resources};
use super::{ExtractedImage, ImageFormat};
use crate::png::{self, ColorType};

/// Thresholds for dropping images before attribute extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanPolicy {
    pub min_width: u32,
    pub min_height: u32,
}

impl Default for CleanPolicy {
    fn default() -> Self {
        CleanPolicy {
            min_width: 64,
            min_height: 64,
        }
    }
}

/// Drops undersized images and exact duplicates (by content hash) of an
/// earlier kept image. Order is preserved.
pub fn clean_images(images: Vec<ExtractedImage>, policy: &CleanPolicy) -> Vec<ExtractedImage> {
    let mut seen = HashSet::new();
    images
        .into_iter()
        .filter(|img| img.width >= policy.min_width && img.height >= policy.min_height)
        .filter(|img| seen.insert(img.content_hash))
        .collect()
}

/// Image XObjects of a page: paint order first, then unreferenced resources.
pub(super) fn image_objects(doc: &lopdf::Document, page: ObjectId) -> Vec<ObjectId> {
    let mut ids: Vec<ObjectId> = Vec::new();
    for p in interpret_page(doc, page).placements {
        if !ids.contains(&p.object) {
            ids.push(p.object);
        }
    }
    let res = Resources::for_page(doc, page);
    for id in res.entries(doc, b"XObject") {
        if ids.contains(&id) {
            continue;
        }
        let is_image = doc
            .get_object(id)
            .and_then(Object::as_stream)
            .map(|s| s.dict.get(b"Subtype").and_then(Object::as_name).ok() == Some(b"Image"))
            .unwrap_or(false);
        if is_image {
            ids.push(id);
        }
    }
    ids
}

pub(super) struct Decoded {
    pub bytes: Vec<u8>,
    pub format: ImageFormat,
    pub width: u32,
    pub height: u32,
}

fn filter_names(dict: &Dictionary) -> Vec<String> {
    let expand = |n: &[u8]| -> String {
        match n {
            b"Fl" => "FlateDecode".into(),
            b"DCT" => "DCTDecode".into(),
            b"AHx" => "ASCIIHexDecode".into(),
            b"A85" => "ASCII85Decode".into(),
            b"CCF" => "CCITTFaxDecode".into(),
            b"RL" => "RunLengthDecode".into(),
            other => String::from_utf8_lossy(other).into_owned(),
        }
    };
    match dict.get(b"Filter") {
        Ok(Object::Name(n)) => vec![expand(n)],
        Ok(Object::Array(a)) => a.iter().filter_map(|o| o.as_name().ok()).map(expand).collect(),
        _ => Vec::new(),
    }
}

fn inflate(data: &[u8]) -> Result<Vec<u8>, String> {
    let mut out = Vec::new();
    ZlibDecoder::new(data)
        .read_to_end(&mut out)
        .map_err(|e| format!("flate: {e}"))?;
    Ok(out)
}

fn ascii_hex(data: &[u8]) -> Result<Vec<u8>, String> {
    let mut digits = Vec::new();
    for &b in data {
        if b == b'>' {
            break;
        }
        if b.is_ascii_whitespace() {
            continue;
        }
        digits.push((b as char).to_digit(16).ok_or("bad hex digit")? as u8);
    }
    if digits.len() % 2 == 1 {
        digits.push(0);
    }
    Ok(digits.chunks(2).map(|p| p[0] << 4 | p[1]).collect())
}

enum ColorSpace {
    Gray,
    Rgb,
    Cmyk,
    Indexed { base: Box<ColorSpace>, palette: Vec<u8> },
    Unsupported(String),
}

impl ColorSpace {
    fn components(&self) -> usize {
        match self {
            ColorSpace::Gray => 1,
            ColorSpace::Rgb => 3,
            ColorSpace::Cmyk => 4,
            ColorSpace::Indexed { .. } => 1,
            ColorSpace::Unsupported(_) => 0,
        }
    }
}

fn color_space(doc: &lopdf::Document, obj: Option<&Object>) -> ColorSpace {
    let Some(obj) = obj else { return ColorSpace::Gray };
    let obj = doc.dereference(obj).map(|(_, o)| o).unwrap_or(obj);
    match obj {
        Object::Name(n) => match n.as_slice() {
            b"DeviceGray" | b"CalGray" | b"G" => ColorSpace::Gray,
            b"DeviceRGB" | b"CalRGB" | b"RGB" => ColorSpace::Rgb,
            b"DeviceCMYK" | b"CMYK" => ColorSpace::Cmyk,
            other => ColorSpace::Unsupported(String::from_utf8_lossy(other).into_owned()),
        },
        Object::Array(a) => {
            let family = a.first().and_then(|o| o.as_name().ok()).unwrap_or(b"");
            match family {
                b"ICCBased" => {
                    let n = a
                        .get(1)
                        .and_then(|o| doc.dereference(o).ok())
                        .and_then(|(_, o)| o.as_stream().ok())
                        .and_then(|s| s.dict.get(b"N").and_then(Object::as_i64).ok());
                    match n {
                        Some(1) => ColorSpace::Gray,
                        Some(3) => ColorSpace::Rgb,
                        Some(4) => ColorSpace::Cmyk,
                        other => ColorSpace::Unsupported(format!("ICCBased N={other:?}")),
                    }
                }
                b"CalGray" => ColorSpace::Gray,
                b"CalRGB" => ColorSpace::Rgb,
                b"Indexed" | b"I" if a.len() == 4 => {
                    let base = color_space(doc, a.get(1));
                    let palette = match doc.dereference(&a[3]).map(|(_, o)| o) {
                        Ok(Object::String(s, _)) => s.clone(),
                        Ok(Object::Stream(s)) => s.decompressed_content().unwrap_or_else(|_| s.content.clone()),
                        _ => Vec::new(),
                    };
                    ColorSpace::Indexed {
                        base: Box::new(base),
                        palette,
                    }
                }
                other => ColorSpace::Unsupported(String::from_utf8_lossy(other).into_owned()),
            }
        }
        _ => ColorSpace::Unsupported("unrecognised colour space object".into()),
    }
}

fn to_rgb(cs: &ColorSpace, px: &[u8]) -> Option<[u8; 3]> {
    Some(match cs {
        ColorSpace::Gray => [px[0]; 3],
        ColorSpace::Rgb => [px[0], px[1], px[2]],
        ColorSpace::Cmyk => {
            let k = 255 - px[3] as u32;
            let ch = |c: u8| ((255 - c as u32) * k / 255) as u8;
            [ch(px[0]), ch(px[1]), ch(px[2])]
        }
        ColorSpace::Indexed { base, palette } => {
            let n = base.components();
            let start = px[0] as usize * n;
            let entry = palette.get(start..start + n)?;
            return to_rgb(base, entry);
        }
        ColorSpace::Unsupported(_) => return None,
    })
}

fn dict_u32(dict: &Dictionary, key: &[u8]) -> Option<u32> {
    dict.get(key).and_then(Object::as_i64).ok().and_then(|v| u32::try_from(v).ok())
}

/// Turns an image XObject into a standalone image file.
///
/// JPEG streams are returned verbatim. Flate streams using PNG predictors are
/// re-wrapped as PNG without recompression. Other raw samples are converted
/// to 8-bit gray or RGB and encoded as PNG. Filters with no standalone file
/// equivalent (JPX, JBIG2, CCITT) come back as `Other` with the stream bytes.
pub(super) fn decode_xobject(doc: &lopdf::Document, id: ObjectId) -> Result<Decoded, String> {
    let stream: &Stream = doc
        .get_object(id)
        .and_then(Object::as_stream)
        .map_err(|e| format!("not a stream: {e}"))?;
    let dict = &stream.dict;
    let width = dict_u32(dict, b"Width").filter(|&w| w > 0).ok_or("missing or zero /Width")?;
    let height = dict_u32(dict, b"Height").filter(|&h| h > 0).ok_or("missing or zero /Height")?;
    let filters = filter_names(dict);

    let mut data = stream.content.clone();
    let mut remaining: &[String] = &filters;
    // Strip transport encodings in front of the image codec.
    while let Some((first, rest)) = remaining.split_first() {
        match first.as_str() {
            "ASCIIHexDecode" => data = ascii_hex(&data)?,
            "FlateDecode" if !rest.is_empty() => data = inflate(&data)?,
            _ => break,
        }
        remaining = rest;
    }

    match remaining {
        [f] if f == "DCTDecode" => {
            let img = image::load_from_memory_with_format(&data, image::ImageFormat::Jpeg)
                .map_err(|e| format!("jpeg decode: {e}"))?;
            Ok(Decoded {
                bytes: data,
                format: ImageFormat::Jpeg,
                width: img.width(),
                height: img.height(),
            })
        }
        [f] if matches!(f.as_str(), "JPXDecode" | "JBIG2Decode" | "CCITTFaxDecode") => Ok(Decoded {
            bytes: data,
            format: ImageFormat::Other,
            width,
            height,
        }),
        [f] if f == "FlateDecode" => {
            let params = dict.get(b"DecodeParms").and_then(Object::as_dict).ok();
            let predictor = params.and_then(|p| p.get(b"Predictor").and_then(Object::as_i64).ok()).unwrap_or(1);
            let bpc = dict_u32(dict, b"BitsPerComponent").unwrap_or(8);
            let cs = color_space(doc, dict.get(b"ColorSpace").ok());
            if predictor >= 10 && bpc == 8 {
                let colors = params.and_then(|p| p.get(b"Colors").and_then(Object::as_i64).ok()).unwrap_or(1);
                let columns = params.and_then(|p| dict_u32(p, b"Columns")).unwrap_or(width);
                let ct = match (&cs, colors) {
                    (ColorSpace::Gray, 1) => Some(ColorType::Gray),
                    (ColorSpace::Rgb, 3) => Some(ColorType::Rgb),
                    _ => None,
                };
                if let (Some(ct), true) = (ct, columns == width) {
                    let bytes = png::wrap_idat(width, height, ct, &data);
                    let img = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)
                        .map_err(|e| format!("png decode: {e}"))?;
                    if (img.width(), img.height()) != (width, height) {
                        return Err("decoded size disagrees with /Width and /Height".into());
                    }
                    return Ok(Decoded {
                        bytes,
                        format: ImageFormat::Png,
                        width,
                        height,
                    });
                }
                return Err("unsupported predictor layout".into());
            }
            let raw = inflate(&data)?;
            samples_to_png(&raw, width, height, bpc, &cs, dict)
        }
        [] => {
            let bpc = dict_u32(dict, b"BitsPerComponent").unwrap_or(8);
            let cs = color_space(doc, dict.get(b"ColorSpace").ok());
            samples_to_png(&data, width, height, bpc, &cs, dict)
        }
        other => Err(format!("unsupported filter chain {other:?}")),
    }
}

fn samples_to_png(
    raw: &[u8],
    width: u32,
    height: u32,
    bpc: u32,
    cs: &ColorSpace,
    dict: &Dictionary,
) -> Result<Decoded, String> {
    let is_mask = dict.get(b"ImageMask").and_then(Object::as_bool).unwrap_or(false);
    let (w, h) = (width as usize, height as usize);
    let gray_like = is_mask || matches!(cs, ColorSpace::Gray);
    if let ColorSpace::Unsupported(name) = cs {
        if !is_mask {
            return Err(format!("unsupported colour space {name}"));
        }
    }
    let bytes = if bpc == 1 && gray_like {
        let row = w.div_ceil(8);
        if raw.len() < row * h {
            return Err(format!("short sample data: {} < {}", raw.len(), row * h));
        }
        let mut px = Vec::with_capacity(w * h);
        for r in 0..h {
            for c in 0..w {
                // 1 is white for gray images; stencil masks paint (black) on 0.
                let bit = raw[r * row + c / 8] >> (7 - c % 8) & 1;
                px.push(if bit == 1 { 255 } else { 0 });
            }
        }
        png::encode(width, height, ColorType::Gray, &px)
    } else if bpc == 8 {
        let n = cs.components();
        let need = w * h * n;
        if n == 0 || raw.len() < need {
            return Err(format!("short sample data: {} < {}", raw.len(), need));
        }
        match cs {
            ColorSpace::Gray => png::encode(width, height, ColorType::Gray, &raw[..need]),
            ColorSpace::Rgb => png::encode(width, height, ColorType::Rgb, &raw[..need]),
            _ => {
                let mut rgb = Vec::with_capacity(w * h * 3);
                for px in raw[..need].chunks(n) {
                    rgb.extend_from_slice(&to_rgb(cs, px).ok_or("palette index out of range")?);
                }
                png::encode(width, height, ColorType::Rgb, &rgb)
            }
        }
    } else {
        return Err(format!("unsupported BitsPerComponent {bpc}"));
    };
    Ok(Decoded {
        bytes,
        format: ImageFormat::Png,
        width,
        height,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(bytes: &[u8], w: u32, h: u32) -> ExtractedImage {
        ExtractedImage::new(bytes.to_vec(), ImageFormat::Png, w, h, 0)
    }

    #[test]
    fn duplicates_collapse_to_first() {
        let out = clean_images(vec![img(b"a", 100, 100), img(b"a", 100, 100)], &CleanPolicy::default());
        assert_eq!(out.len(), 1);
    }

    #[test]
    fn icon_below_minimum_is_dropped() {
        let out = clean_images(vec![img(b"icon", 16, 16)], &CleanPolicy::default());
        assert!(out.is_empty());
    }

    #[test]
    fn duplicate_and_short_image_removed() {
        let a = img(b"A", 100, 100);
        let b = a.clone();
        let c = img(b"C", 200, 50);
        let out = clean_images(vec![a.clone(), b, c], &CleanPolicy::default());
        assert_eq!(out, vec![a]);
    }

    #[test]
    fn dropped_small_copy_does_not_shadow_a_large_one() {
        // Same bytes can't have different sizes in practice, but the hash set
        // only records kept images.
        let out = clean_images(
            vec![img(b"x", 10, 10), img(b"y", 80, 80)],
            &CleanPolicy::default(),
        );
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].bytes, b"y");
    }

    #[test]
    fn cmyk_and_indexed_conversion() {
        assert_eq!(to_rgb(&ColorSpace::Cmyk, &[0, 0, 0, 0]), Some([255, 255, 255]));
        assert_eq!(to_rgb(&ColorSpace::Cmyk, &[0, 0, 0, 255]), Some([0, 0, 0]));
        let idx = ColorSpace::Indexed {
            base: Box::new(ColorSpace::Rgb),
            palette: vec![1, 2, 3, 4, 5, 6],
        };
        assert_eq!(to_rgb(&idx, &[1]), Some([4, 5, 6]));
        assert_eq!(to_rgb(&idx, &[2]), None);
    }
}
