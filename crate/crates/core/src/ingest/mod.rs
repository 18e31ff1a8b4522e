//! PDF ingestion: document structure, native text, embedded images, page
//! rasterization for the OCR fallback, and image cleaning.

mod content;
mod images;
pub mod ocr;
mod raster;

use std::fmt;
use std::path::{Path, PathBuf};

use lopdf::{Object, ObjectId};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::warning::{Warning, WarningKind, WithWarnings};

pub use images::{clean_images, CleanPolicy};
pub use ocr::{
    correct_blocks, correct_spelling, extract_text_ocr, CommandOcr, IdentityCorrector, MockOcr,
    OcrEngine, OcrError, SpellCorrector, WordMapCorrector,
};
pub use raster::{preprocess_raster, Raster, DEFAULT_DPI};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("i/o error reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("not a PDF file: {0}")]
    NotAPdf(String),
    #[error("encrypted PDF files are not supported")]
    EncryptedUnsupported,
    #[error("page {index} out of range (document has {count} pages)")]
    PageOutOfRange { index: usize, count: usize },
    #[error("dpi {0} outside the supported range 72..=600")]
    InvalidDpi(u32),
    #[error("page render failed: {0}")]
    RenderFailure(String),
    #[error("OCR engine unavailable: {0}")]
    EngineUnavailable(String),
    #[error("OCR engine failed: {0}")]
    EngineFailure(String),
}

/// Page rectangle in PDF points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MediaBox {
    pub llx: f64,
    pub lly: f64,
    pub urx: f64,
    pub ury: f64,
}

impl MediaBox {
    pub const LETTER: MediaBox = MediaBox {
        llx: 0.0,
        lly: 0.0,
        urx: 612.0,
        ury: 792.0,
    };

    pub fn width(&self) -> f64 {
        (self.urx - self.llx).abs()
    }

    pub fn height(&self) -> f64 {
        (self.ury - self.lly).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PageInfo {
    pub index: usize,
    pub media_box: MediaBox,
    object: ObjectId,
}

/// A parsed PDF. Immutable after loading and shareable across threads.
pub struct Document {
    source_path: PathBuf,
    inner: lopdf::Document,
    pages: Vec<PageInfo>,
}

impl fmt::Debug for Document {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Document")
            .field("source_path", &self.source_path)
            .field("page_count", &self.pages.len())
            .finish()
    }
}

impl Document {
    pub fn source_path(&self) -> &Path {
        &self.source_path
    }

    pub fn page_count(&self) -> usize {
        self.pages.len()
    }

    pub fn pages(&self) -> &[PageInfo] {
        &self.pages
    }

    pub fn page(&self, index: usize) -> Result<&PageInfo, IngestError> {
        self.pages.get(index).ok_or(IngestError::PageOutOfRange {
            index,
            count: self.pages.len(),
        })
    }

    pub(crate) fn lopdf(&self) -> &lopdf::Document {
        &self.inner
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TextOrigin {
    Native,
    Ocr,
}

/// Top-left anchor of a block in points, measured from the page's top edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockPosition {
    pub top: f64,
    pub left: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextBlock {
    pub text: String,
    pub page_index: usize,
    pub origin: TextOrigin,
    /// Known for native blocks; OCR engines report plain text only.
    pub position: Option<BlockPosition>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageFormat {
    Jpeg,
    Png,
    Tiff,
    Other,
}

impl ImageFormat {
    pub fn mime_type(self) -> Option<&'static str> {
        match self {
            ImageFormat::Jpeg => Some("image/jpeg"),
            ImageFormat::Png => Some("image/png"),
            ImageFormat::Tiff => Some("image/tiff"),
            ImageFormat::Other => None,
        }
    }
}

/// sha-256 of an image's bytes.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ContentHash(pub [u8; 32]);

impl ContentHash {
    pub fn of(bytes: &[u8]) -> Self {
        ContentHash(Sha256::digest(bytes).into())
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Debug for ContentHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ContentHash({})", &self.to_hex()[..12])
    }
}

impl fmt::Display for ContentHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedImage {
    pub bytes: Vec<u8>,
    pub format: ImageFormat,
    pub width: u32,
    pub height: u32,
    pub page_index: usize,
    pub content_hash: ContentHash,
}

impl ExtractedImage {
    pub fn new(bytes: Vec<u8>, format: ImageFormat, width: u32, height: u32, page_index: usize) -> Self {
        let content_hash = ContentHash::of(&bytes);
        ExtractedImage {
            bytes,
            format,
            width,
            height,
            page_index,
            content_hash,
        }
    }
}

/// Extracted content of one page.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Page {
    pub index: usize,
    pub text_blocks: Vec<TextBlock>,
    pub images: Vec<ExtractedImage>,
}

impl Page {
    /// Block texts joined by newlines.
    pub fn text(&self) -> String {
        self.text_blocks
            .iter()
            .map(|b| b.text.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Loads a PDF's structure. No content is decoded yet.
pub fn load_document(path: impl AsRef<Path>) -> Result<Document, IngestError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            IngestError::FileNotFound(path.to_path_buf())
        } else {
            IngestError::Io {
                path: path.to_path_buf(),
                source: e,
            }
        }
    })?;
    load_document_bytes(path, &bytes)
}

/// Loads a PDF from memory; `source_path` is only recorded.
pub fn load_document_bytes(source_path: impl Into<PathBuf>, bytes: &[u8]) -> Result<Document, IngestError> {
    let head = &bytes[..bytes.len().min(1024)];
    if !head.windows(5).any(|w| w == b"%PDF-") {
        return Err(IngestError::NotAPdf(if bytes.is_empty() {
            "empty file".into()
        } else {
            "missing %PDF- header".into()
        }));
    }
    let inner = match lopdf::Document::load_mem(bytes) {
        Ok(doc) => doc,
        Err(e) => {
            if bytes.windows(8).any(|w| w == b"/Encrypt") {
                return Err(IngestError::EncryptedUnsupported);
            }
            return Err(IngestError::NotAPdf(e.to_string()));
        }
    };
    if inner.trailer.has(b"Encrypt") {
        return Err(IngestError::EncryptedUnsupported);
    }
    let pages = inner
        .get_pages()
        .into_values()
        .enumerate()
        .map(|(index, object)| PageInfo {
            index,
            media_box: media_box(&inner, object),
            object,
        })
        .collect();
    Ok(Document {
        source_path: source_path.into(),
        inner,
        pages,
    })
}

fn media_box(doc: &lopdf::Document, page: ObjectId) -> MediaBox {
    let mut node = doc.get_dictionary(page).ok();
    let mut hops = 0;
    while let Some(dict) = node {
        if let Ok(obj) = dict.get(b"MediaBox") {
            let arr = doc.dereference(obj).ok().and_then(|(_, o)| o.as_array().ok());
            if let Some(arr) = arr {
                let nums: Vec<f64> = arr
                    .iter()
                    .filter_map(|o| doc.dereference(o).ok()?.1.as_float().ok().map(f64::from))
                    .collect();
                if nums.len() == 4 {
                    return MediaBox {
                        llx: nums[0].min(nums[2]),
                        lly: nums[1].min(nums[3]),
                        urx: nums[0].max(nums[2]),
                        ury: nums[1].max(nums[3]),
                    };
                }
            }
        }
        hops += 1;
        if hops > 64 {
            break;
        }
        node = dict
            .get(b"Parent")
            .and_then(Object::as_reference)
            .and_then(|id| doc.get_dictionary(id))
            .ok();
    }
    MediaBox::LETTER
}

/// Decodes the text operators of a page into blocks, one per text object,
/// sorted top-to-bottom then left-to-right by the block's first glyph.
///
/// A damaged content stream yields the blocks decoded before the damage plus
/// a warning.
pub fn extract_text_native(doc: &Document, page_index: usize) -> Result<WithWarnings<TextBlock>, IngestError> {
    let info = doc.page(page_index)?;
    let content = content::interpret_page(doc.lopdf(), info.object);
    let mb = info.media_box;
    let mut blocks: Vec<TextBlock> = content
        .blocks
        .into_iter()
        .map(|b| TextBlock {
            text: b.text,
            page_index,
            origin: TextOrigin::Native,
            position: Some(BlockPosition {
                top: mb.ury - b.y,
                left: b.x - mb.llx,
            }),
        })
        .collect();
    blocks.sort_by_key(|b| {
        let p = b.position.expect("native blocks are positioned");
        ((p.top * 100.0).round() as i64, (p.left * 100.0).round() as i64)
    });
    let warnings = content
        .errors
        .into_iter()
        .map(|e| {
            Warning::new(
                WarningKind::MalformedContentStream,
                Some(page_index),
                format!("at byte {}: {}", e.offset, e.message),
            )
        })
        .collect();
    Ok(WithWarnings {
        items: blocks,
        warnings,
    })
}

/// Returns every image XObject on the page, in paint order followed by any
/// unreferenced image resources. Undecodable images are skipped with a
/// warning.
pub fn extract_images(doc: &Document, page_index: usize) -> Result<WithWarnings<ExtractedImage>, IngestError> {
    let info = doc.page(page_index)?;
    let mut out = WithWarnings::clean(Vec::new());
    for id in images::image_objects(doc.lopdf(), info.object) {
        match images::decode_xobject(doc.lopdf(), id) {
            Ok(d) => out
                .items
                .push(ExtractedImage::new(d.bytes, d.format, d.width, d.height, page_index)),
            Err(msg) => out.warnings.push(Warning::new(
                WarningKind::ImageDecodeFailure,
                Some(page_index),
                format!("image object {} {}: {msg}", id.0, id.1),
            )),
        }
    }
    Ok(out)
}

/// Renders a page at `dpi`: white background with every decodable image
/// painted at its placement. Text is not rendered.
pub fn rasterize_page(doc: &Document, page_index: usize, dpi: u32) -> Result<Raster, IngestError> {
    raster::rasterize(doc, page_index, dpi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_byte_file_is_not_a_pdf() {
        let err = load_document_bytes("empty.pdf", b"").unwrap_err();
        assert!(matches!(err, IngestError::NotAPdf(_)));
    }

    #[test]
    fn garbage_is_not_a_pdf() {
        let err = load_document_bytes("x.pdf", b"hello world").unwrap_err();
        assert!(matches!(err, IngestError::NotAPdf(_)));
        let err = load_document_bytes("x.pdf", b"%PDF-1.4\nnot really").unwrap_err();
        assert!(matches!(err, IngestError::NotAPdf(_)));
    }

    #[test]
    fn missing_file() {
        let err = load_document("/definitely/not/here.pdf").unwrap_err();
        assert!(matches!(err, IngestError::FileNotFound(_)));
    }

    #[test]
    fn content_hash_is_sha256() {
        // sha256("abc")
        assert_eq!(
            ContentHash::of(b"abc").to_hex(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
