//! Synthetic trend-report PDFs with a sidecar manifest of what a correct
//! extractor should find in them.

use std::path::{Path, PathBuf};

use lopdf::content::{Content, Operation};
use lopdf::{dictionary, Dictionary, Document, Object, ObjectId, Stream, StringFormat};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::extract::extract_hashtags;
use crate::ingest::ContentHash;
use crate::png::{self, ColorType};

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("layout: {0}")]
    Layout(String),
    #[error("text cannot be encoded in WinAnsi: {0:?}")]
    Unencodable(String),
    #[error("pdf writer: {0}")]
    Pdf(String),
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> SynthError + '_ {
    move |source| SynthError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub const LETTER: (f64, f64) = (612.0, 792.0);

/// A paragraph placed on the page. Lines wrap at spaces only, so extraction
/// recovers `text` with whitespace collapsed.
#[derive(Debug, Clone, PartialEq)]
pub struct TextLayout {
    pub text: String,
    pub x: f64,
    /// Distance from the top edge to the top of the first line.
    pub top: f64,
    pub size: f64,
    /// Maximum characters per line.
    pub wrap: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageLayout {
    /// PNG file contents.
    pub png: Vec<u8>,
    pub x: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PageLayout {
    pub size: (f64, f64),
    pub blocks: Vec<TextLayout>,
    pub images: Vec<ImageLayout>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Layout {
    pub pages: Vec<PageLayout>,
}

/// Greedy wrap at spaces.
pub fn wrap_lines(text: &str, width: usize) -> Vec<String> {
    let mut lines = Vec::new();
    let mut cur = String::new();
    for word in text.split_whitespace() {
        if !cur.is_empty() && cur.chars().count() + 1 + word.chars().count() > width.max(1) {
            lines.push(std::mem::take(&mut cur));
        }
        if !cur.is_empty() {
            cur.push(' ');
        }
        cur.push_str(word);
    }
    if !cur.is_empty() {
        lines.push(cur);
    }
    lines
}

fn encode_winansi(text: &str) -> Result<Vec<u8>, SynthError> {
    let font = dictionary! { "Type" => "Font", "Encoding" => "WinAnsiEncoding" };
    let scratch = Document::new();
    let enc = font
        .get_font_encoding(&scratch)
        .map_err(|e| SynthError::Pdf(e.to_string()))?;
    let bytes = Document::encode_text(&enc, text);
    match Document::decode_text(&enc, &bytes) {
        Ok(back) if back == text => Ok(bytes),
        _ => Err(SynthError::Unencodable(text.to_string())),
    }
}

/// 8-bit checkerboard in two colours, `cell` pixels per square.
pub fn pattern_png(pixels: u32, a: [u8; 3], b: [u8; 3], cell: u32, stamp: &[u8]) -> Vec<u8> {
    let cell = cell.max(1);
    let mut data = Vec::with_capacity((pixels * pixels * 3) as usize);
    for y in 0..pixels {
        for x in 0..pixels {
            let c = if (x / cell + y / cell).is_multiple_of(2) { a } else { b };
            data.extend_from_slice(&c);
        }
    }
    // The stamp makes otherwise identical patterns distinct.
    for (i, s) in stamp.iter().enumerate().take(data.len()) {
        data[i] = *s;
    }
    png::encode(pixels, pixels, ColorType::Rgb, &data)
}

fn image_xobject(png_bytes: &[u8]) -> Result<Stream, SynthError> {
    let (w, h, color, idat) = match png::split(png_bytes) {
        Some(parts) => parts,
        None => {
            // Not an 8-bit gray/RGB single-IDAT-compatible file: re-encode.
            let img = image::load_from_memory(png_bytes)
                .map_err(|e| SynthError::Layout(format!("unreadable image: {e}")))?
                .to_rgb8();
            let (w, h) = img.dimensions();
            (w, h, ColorType::Rgb, png::compress_rows(w, h, ColorType::Rgb, img.as_raw()))
        }
    };
    let (space, colors) = match color {
        ColorType::Gray => ("DeviceGray", 1),
        ColorType::Rgb => ("DeviceRGB", 3),
    };
    let dict = dictionary! {
        "Type" => "XObject",
        "Subtype" => "Image",
        "Width" => w as i64,
        "Height" => h as i64,
        "ColorSpace" => space,
        "BitsPerComponent" => 8,
        "Filter" => "FlateDecode",
        "DecodeParms" => dictionary! {
            "Predictor" => 15,
            "Colors" => colors,
            "BitsPerComponent" => 8,
            "Columns" => w as i64,
        },
    };
    Ok(Stream::new(dict, idat))
}

fn real(v: f64) -> Object {
    Object::Real(v as f32)
}

/// Renders a layout as PDF bytes. Output is a pure function of the layout.
pub fn write_pdf(layout: &Layout) -> Result<Vec<u8>, SynthError> {
    let mut doc = Document::with_version("1.5");
    let pages_id = doc.new_object_id();
    let font_id = doc.add_object(dictionary! {
        "Type" => "Font",
        "Subtype" => "Type1",
        "BaseFont" => "Helvetica",
        "Encoding" => "WinAnsiEncoding",
    });
    let mut kids: Vec<Object> = Vec::new();
    for page in &layout.pages {
        let (pw, ph) = page.size;
        let mut ops = Vec::new();
        for b in &page.blocks {
            let leading = b.size * 1.2;
            ops.push(Operation::new("BT", vec![]));
            ops.push(Operation::new("Tf", vec!["F1".into(), real(b.size)]));
            ops.push(Operation::new("TL", vec![real(leading)]));
            ops.push(Operation::new("Td", vec![real(b.x), real(ph - b.top - b.size)]));
            for (i, line) in wrap_lines(&b.text, b.wrap).iter().enumerate() {
                if i > 0 {
                    ops.push(Operation::new("T*", vec![]));
                }
                ops.push(Operation::new(
                    "Tj",
                    vec![Object::String(encode_winansi(line)?, StringFormat::Literal)],
                ));
            }
            ops.push(Operation::new("ET", vec![]));
        }
        let mut xobjects = Dictionary::new();
        for (i, img) in page.images.iter().enumerate() {
            let name = format!("Im{}", i + 1);
            let id: ObjectId = doc.add_object(image_xobject(&img.png)?);
            xobjects.set(name.as_bytes().to_vec(), id);
            ops.push(Operation::new("q", vec![]));
            ops.push(Operation::new(
                "cm",
                vec![
                    real(img.width),
                    0.into(),
                    0.into(),
                    real(img.height),
                    real(img.x),
                    real(ph - img.top - img.height),
                ],
            ));
            ops.push(Operation::new("Do", vec![Object::Name(name.into_bytes())]));
            ops.push(Operation::new("Q", vec![]));
        }
        let body = Content { operations: ops }
            .encode()
            .map_err(|e| SynthError::Pdf(e.to_string()))?;
        let mut stream = Stream::new(Dictionary::new(), body);
        stream.compress().map_err(|e| SynthError::Pdf(e.to_string()))?;
        let content_id = doc.add_object(stream);
        let page_id = doc.add_object(dictionary! {
            "Type" => "Page",
            "Parent" => pages_id,
            "MediaBox" => vec![0.into(), 0.into(), real(pw), real(ph)],
            "Contents" => content_id,
            "Resources" => dictionary! {
                "Font" => dictionary! { "F1" => font_id },
                "XObject" => xobjects,
            },
        });
        kids.push(page_id.into());
    }
    let count = kids.len() as i64;
    doc.objects.insert(
        pages_id,
        Object::Dictionary(dictionary! { "Type" => "Pages", "Kids" => kids, "Count" => count }),
    );
    let catalog_id = doc.add_object(dictionary! { "Type" => "Catalog", "Pages" => pages_id });
    doc.trailer.set("Root", catalog_id);
    let mut out = Vec::new();
    doc.save_to(&mut out).map_err(|e| SynthError::Pdf(e.to_string()))?;
    Ok(out)
}

/// What a correct extractor should recover from one generated page.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestPage {
    pub index: usize,
    /// Block texts joined by '\n', in reading order.
    pub text: String,
    pub word_count: usize,
    /// sha-256 of each embedded image as extracted, in paint order.
    pub image_hashes: Vec<String>,
    pub hashtags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub pages: Vec<ManifestPage>,
}

impl Manifest {
    pub fn from_layout(layout: &Layout, seed: u64) -> Self {
        let pages = layout
            .pages
            .iter()
            .enumerate()
            .map(|(index, p)| {
                let text = p
                    .blocks
                    .iter()
                    .map(|b| b.text.split_whitespace().collect::<Vec<_>>().join(" "))
                    .collect::<Vec<_>>()
                    .join("\n");
                ManifestPage {
                    index,
                    word_count: text.split_whitespace().count(),
                    image_hashes: p
                        .images
                        .iter()
                        .map(|i| {
                            // What the extractor sees: the PNG as re-wrapped from the stream.
                            let png_bytes = match png::split(&i.png) {
                                Some((w, h, c, idat)) => png::wrap_idat(w, h, c, &idat),
                                None => i.png.clone(),
                            };
                            ContentHash::of(&png_bytes).to_hex()
                        })
                        .collect(),
                    hashtags: extract_hashtags(&text, index).into_iter().map(|h| h.tag).collect(),
                    text,
                }
            })
            .collect();
        Manifest { seed, pages }
    }
}

/// Parameters for random synthetic reports.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub pages: usize,
    /// Inclusive bounds.
    pub words_per_page: (usize, usize),
    pub images_per_page: (usize, usize),
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            pages: 10,
            words_per_page: (500, 1000),
            images_per_page: (4, 6),
            seed: 1,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidSpec(m.to_string()));
        if self.pages == 0 {
            return bad("pages must be positive");
        }
        if self.words_per_page.0 > self.words_per_page.1 || self.images_per_page.0 > self.images_per_page.1 {
            return bad("range lower bound exceeds upper bound");
        }
        if self.words_per_page.1 > 1500 {
            return bad("at most 1500 words fit on a page");
        }
        if self.images_per_page.1 > 6 {
            return bad("at most 6 images fit on a page");
        }
        Ok(())
    }
}

const VOCABULARY: &[&str] = &[
    "oversized", "boxy", "silhouette", "knitwear", "cardigan", "v-neck", "crew", "neck", "raglan", "sleeves",
    "cotton", "organic", "linen", "wool", "mohair", "cashmere", "denim", "twill", "poplin", "jersey", "ribbed",
    "cuffs", "hem", "ruffle", "pleated", "utility", "pockets", "relaxed", "fit", "cropped", "longline", "tonal",
    "palette", "earthy", "greens", "grey", "tones", "soft", "finish", "cosy", "texture", "brushed", "yarn",
    "sustainable", "recycled", "modular", "layering", "outerwear", "jacket", "blazer", "shirt", "blouse", "dress",
    "skirt", "trousers", "casual", "tailoring", "womenswear", "menswear", "youthful", "update", "heritage",
    "classic", "pattern", "argyle", "stripe", "check", "floral", "print", "motif", "contrast", "collar", "button",
    "placket", "drop", "shoulder", "balloon", "puff", "cuff", "waist", "drawstring", "elastic", "seam", "detail",
    "trend", "season", "autumn", "winter", "spring", "summer", "commercial", "key", "item", "wardrobe", "comfort",
    "versatile", "investment", "quality", "craft", "artisanal", "vintage", "wash", "faded", "indigo", "navy",
    "burgundy", "camel", "ivory", "black", "white", "the", "and", "with", "for", "in", "a", "of", "to", "is",
    "this", "look", "new", "bold", "clean", "lines", "shape", "volume", "proportion",
];

fn random_words(rng: &mut ChaCha8Rng, n: usize, page: usize) -> Vec<String> {
    let mut words: Vec<String> = (0..n)
        .map(|_| VOCABULARY.choose(rng).expect("non-empty vocabulary").to_string())
        .collect();
    // One or two planted hashtags per page, replacing ordinary words.
    let tags = rng.gen_range(1..=2).min(n);
    for t in 0..tags {
        let at = rng.gen_range(0..n);
        if !words[at].starts_with('#') {
            words[at] = format!("#trend{page}x{t}");
        }
    }
    words
}

/// Builds the layout for a random report.
pub fn synthetic_layout(spec: &SynthSpec) -> Result<Layout, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut counter: u32 = 0;
    let mut pages = Vec::with_capacity(spec.pages);
    for p in 0..spec.pages {
        let n = rng.gen_range(spec.words_per_page.0..=spec.words_per_page.1);
        let words = random_words(&mut rng, n, p);
        let mut blocks = Vec::new();
        let mut top = 30.0;
        let (size, wrap) = (5.5, 140);
        let mut rest: &[String] = &words;
        while !rest.is_empty() {
            let take = rng.gen_range(60..=120).min(rest.len());
            let text = rest[..take].join(" ");
            let lines = wrap_lines(&text, wrap).len() as f64;
            blocks.push(TextLayout {
                text,
                x: 18.0,
                top,
                size,
                wrap,
            });
            top += lines * size * 1.2 + 4.0;
            rest = &rest[take..];
        }
        let k = rng.gen_range(spec.images_per_page.0..=spec.images_per_page.1);
        let images = (0..k)
            .map(|i| {
                counter += 1;
                let a: [u8; 3] = rng.gen();
                let b: [u8; 3] = rng.gen();
                let cell = rng.gen_range(4..=16);
                ImageLayout {
                    png: pattern_png(96, a, b, cell, &counter.to_be_bytes()),
                    x: 18.0 + i as f64 * 96.0,
                    top: 792.0 - 18.0 - 88.0,
                    width: 88.0,
                    height: 88.0,
                }
            })
            .collect();
        pages.push(PageLayout {
            size: LETTER,
            blocks,
            images,
        });
    }
    Ok(Layout { pages })
}

/// Sidecar manifest path for a generated PDF: `x.pdf` -> `x.manifest.json`.
pub fn manifest_path(pdf: &Path) -> PathBuf {
    pdf.with_extension("manifest.json")
}

/// Generates the PDF in memory.
pub fn synthesize(spec: &SynthSpec) -> Result<(Vec<u8>, Manifest), SynthError> {
    let layout = synthetic_layout(spec)?;
    Ok((write_pdf(&layout)?, Manifest::from_layout(&layout, spec.seed)))
}

/// Writes the PDF to `out` and its manifest next to it.
pub fn generate_synthetic_document(spec: &SynthSpec, out: &Path) -> Result<Manifest, SynthError> {
    let (pdf, manifest) = synthesize(spec)?;
    write_outputs(out, &pdf, &manifest)?;
    Ok(manifest)
}

fn write_outputs(out: &Path, pdf: &[u8], manifest: &Manifest) -> Result<(), SynthError> {
    std::fs::write(out, pdf).map_err(io(out))?;
    let mpath = manifest_path(out);
    let mut json = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    json.push('\n');
    std::fs::write(&mpath, json).map_err(io(&mpath))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LayoutFile {
    #[serde(default)]
    pages: Vec<PageFile>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PageFile {
    #[serde(default)]
    width: Option<f64>,
    #[serde(default)]
    height: Option<f64>,
    #[serde(default)]
    blocks: Vec<BlockFile>,
    #[serde(default)]
    images: Vec<ImageFile>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BlockFile {
    text: String,
    x: f64,
    top: f64,
    #[serde(default = "default_size")]
    size: f64,
    #[serde(default = "default_wrap")]
    wrap: usize,
}

fn default_size() -> f64 {
    10.0
}

fn default_wrap() -> usize {
    90
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ImageFile {
    x: f64,
    top: f64,
    width: f64,
    height: f64,
    /// PNG file relative to the layout file.
    file: Option<PathBuf>,
    pattern: Option<PatternFile>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PatternFile {
    pixels: u32,
    a: [u8; 3],
    b: [u8; 3],
    #[serde(default = "default_cell")]
    cell: u32,
    #[serde(default)]
    stamp: u32,
}

fn default_cell() -> u32 {
    8
}

/// Reads a hand-authored layout (TOML). Image files resolve against the
/// layout's directory.
pub fn load_layout(path: &Path) -> Result<Layout, SynthError> {
    let src = std::fs::read_to_string(path).map_err(io(path))?;
    let file: LayoutFile = toml::from_str(&src).map_err(|e| SynthError::Layout(e.to_string()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut pages = Vec::new();
    for (pi, p) in file.pages.into_iter().enumerate() {
        let mut images = Vec::new();
        for (ii, img) in p.images.into_iter().enumerate() {
            let png_bytes = match (img.file, img.pattern) {
                (Some(f), None) => {
                    let f = base.join(f);
                    std::fs::read(&f).map_err(io(&f))?
                }
                (None, Some(pt)) => pattern_png(pt.pixels, pt.a, pt.b, pt.cell, &pt.stamp.to_be_bytes()),
                _ => {
                    return Err(SynthError::Layout(format!(
                        "page {pi} image {ii}: give exactly one of file or pattern"
                    )))
                }
            };
            images.push(ImageLayout {
                png: png_bytes,
                x: img.x,
                top: img.top,
                width: img.width,
                height: img.height,
            });
        }
        pages.push(PageLayout {
            size: (p.width.unwrap_or(LETTER.0), p.height.unwrap_or(LETTER.1)),
            blocks: p
                .blocks
                .into_iter()
                .map(|b| TextLayout {
                    text: b.text,
                    x: b.x,
                    top: b.top,
                    size: b.size,
                    wrap: b.wrap,
                })
                .collect(),
            images,
        });
    }
    Ok(Layout { pages })
}

/// Renders a layout file to `out` plus manifest.
pub fn generate_from_layout(layout_path: &Path, out: &Path) -> Result<Manifest, SynthError> {
    let layout = load_layout(layout_path)?;
    let pdf = write_pdf(&layout)?;
    let manifest = Manifest::from_layout(&layout, 0);
    write_outputs(out, &pdf, &manifest)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrapping_keeps_words() {
        let lines = wrap_lines("aa bb cc dd", 5);
        assert_eq!(lines, ["aa bb", "cc dd"]);
        assert_eq!(wrap_lines("toolongword x", 4), ["toolongword", "x"]);
        assert!(wrap_lines("   ", 10).is_empty());
    }

    #[test]
    fn winansi() {
        assert_eq!(encode_winansi("we\u{2019}re").unwrap(), b"we\x92re");
        assert!(encode_winansi("\u{4e2d}").is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(SynthSpec { pages: 0, ..SynthSpec::default() }.validate().is_err());
        assert!(SynthSpec {
            words_per_page: (10, 5),
            ..SynthSpec::default()
        }
        .validate()
        .is_err());
        SynthSpec::default().validate().unwrap();
    }

    #[test]
    fn seeded_determinism() {
        let spec = SynthSpec {
            pages: 3,
            ..SynthSpec::default()
        };
        let (a, ma) = synthesize(&spec).unwrap();
        let (b, mb) = synthesize(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(ma, mb);
        let (c, _) = synthesize(&SynthSpec { seed: 2, ..spec }).unwrap();
        assert_ne!(a, c);
    }
}
