//! Injectable OCR and spell-correction hooks.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;
use std::process::{Command, Stdio};

use super::{IngestError, Raster, TextBlock, TextOrigin};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OcrError {
    #[error("engine unavailable: {0}")]
    Unavailable(String),
    #[error("engine failure: {0}")]
    Failure(String),
}

/// Turns a raster into plain text.
///
/// Implementations that cannot be called from several threads at once return
/// `true` from [`OcrEngine::is_serial`]; the pipeline then serializes calls.
pub trait OcrEngine: Send + Sync {
    fn recognize(&self, raster: &Raster) -> Result<String, OcrError>;

    fn is_serial(&self) -> bool {
        false
    }
}

/// Runs the engine and splits its output into blocks at blank lines.
pub fn extract_text_ocr(
    raster: &Raster,
    engine: &dyn OcrEngine,
    page_index: usize,
) -> Result<Vec<TextBlock>, IngestError> {
    let text = engine.recognize(raster).map_err(|e| match e {
        OcrError::Unavailable(m) => IngestError::EngineUnavailable(m),
        OcrError::Failure(m) => IngestError::EngineFailure(m),
    })?;
    let mut blocks = Vec::new();
    let mut para: Vec<&str> = Vec::new();
    for line in text.lines().chain(std::iter::once("")) {
        if line.trim().is_empty() {
            if !para.is_empty() {
                blocks.push(TextBlock {
                    text: para.join(" ").split_whitespace().collect::<Vec<_>>().join(" "),
                    page_index,
                    origin: TextOrigin::Ocr,
                    position: None,
                });
                para.clear();
            }
        } else {
            para.push(line.trim());
        }
    }
    Ok(blocks)
}

/// Returns canned text, or reports itself unavailable when built with `None`.
#[derive(Debug, Clone, Default)]
pub struct MockOcr {
    text: Option<String>,
}

impl MockOcr {
    pub fn returning(text: impl Into<String>) -> Self {
        MockOcr {
            text: Some(text.into()),
        }
    }

    pub fn unavailable() -> Self {
        MockOcr { text: None }
    }
}

impl OcrEngine for MockOcr {
    fn recognize(&self, _raster: &Raster) -> Result<String, OcrError> {
        self.text
            .clone()
            .ok_or_else(|| OcrError::Unavailable("mock engine configured as unavailable".into()))
    }
}

/// An external OCR program that reads a PNM image on stdin and writes text to
/// stdout, e.g. `tesseract stdin stdout`.
#[derive(Debug, Clone)]
pub struct CommandOcr {
    program: String,
    args: Vec<String>,
}

impl CommandOcr {
    pub fn new(program: impl Into<String>, args: Vec<String>) -> Self {
        CommandOcr {
            program: program.into(),
            args,
        }
    }
}

impl OcrEngine for CommandOcr {
    fn recognize(&self, raster: &Raster) -> Result<String, OcrError> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound | std::io::ErrorKind::PermissionDenied => {
                    OcrError::Unavailable(format!("{}: {e}", self.program))
                }
                _ => OcrError::Failure(format!("{}: {e}", self.program)),
            })?;
        let pnm = raster.to_pnm();
        let mut stdin = child.stdin.take().expect("stdin was piped");
        let writer = std::thread::spawn(move || stdin.write_all(&pnm));
        let mut stdout = String::new();
        child
            .stdout
            .take()
            .expect("stdout was piped")
            .read_to_string(&mut stdout)
            .map_err(|e| OcrError::Failure(e.to_string()))?;
        let mut stderr = String::new();
        if let Some(mut s) = child.stderr.take() {
            let _ = s.read_to_string(&mut stderr);
        }
        let status = child.wait().map_err(|e| OcrError::Failure(e.to_string()))?;
        let _ = writer.join();
        if !status.success() {
            return Err(OcrError::Failure(format!(
                "{} exited with {status}: {}",
                self.program,
                stderr.trim()
            )));
        }
        Ok(stdout)
    }
}

/// Post-OCR text repair.
pub trait SpellCorrector: Send + Sync {
    fn correct(&self, text: &str) -> Result<String, String>;

    fn is_serial(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityCorrector;

impl SpellCorrector for IdentityCorrector {
    fn correct(&self, text: &str) -> Result<String, String> {
        Ok(text.to_string())
    }
}

/// Replaces whole words found in a fixed misspelling table. Matching is
/// case-insensitive; the replacement is inserted as written.
#[derive(Debug, Clone, Default)]
pub struct WordMapCorrector {
    map: HashMap<String, String>,
}

impl WordMapCorrector {
    pub fn new<I, A, B>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (A, B)>,
        A: AsRef<str>,
        B: Into<String>,
    {
        WordMapCorrector {
            map: pairs
                .into_iter()
                .map(|(a, b)| (a.as_ref().to_lowercase(), b.into()))
                .collect(),
        }
    }

    /// Reads `wrong => right` lines; `#` starts a comment line.
    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let pairs = text.lines().filter_map(|l| {
            let l = l.trim();
            if l.is_empty() || l.starts_with('#') {
                return None;
            }
            let (a, b) = l.split_once("=>")?;
            Some((a.trim().to_string(), b.trim().to_string()))
        });
        Ok(WordMapCorrector::new(pairs))
    }
}

impl SpellCorrector for WordMapCorrector {
    fn correct(&self, text: &str) -> Result<String, String> {
        let mut out = String::with_capacity(text.len());
        let mut word = String::new();
        let flush = |word: &mut String, out: &mut String| {
            if !word.is_empty() {
                match self.map.get(&word.to_lowercase()) {
                    Some(fix) => out.push_str(fix),
                    None => out.push_str(word),
                }
                word.clear();
            }
        };
        for c in text.chars() {
            if c.is_alphanumeric() || c == '\'' {
                word.push(c);
            } else {
                flush(&mut word, &mut out);
                out.push(c);
            }
        }
        flush(&mut word, &mut out);
        Ok(out)
    }
}

/// Applies the corrector, keeping the input when it fails.
pub fn correct_spelling(text: &str, corrector: &dyn SpellCorrector) -> String {
    match corrector.correct(text) {
        Ok(fixed) => fixed,
        Err(e) => {
            log::warn!("spell corrector failed, keeping original text: {e}");
            text.to_string()
        }
    }
}

/// Corrects OCR-origin blocks only; native text passes through untouched.
pub fn correct_blocks(blocks: &[TextBlock], corrector: &dyn SpellCorrector) -> Vec<TextBlock> {
    blocks
        .iter()
        .map(|b| match b.origin {
            TextOrigin::Ocr => TextBlock {
                text: correct_spelling(&b.text, corrector),
                ..b.clone()
            },
            TextOrigin::Native => b.clone(),
        })
        .collect()
}
