//! The four stages run end to end: content extraction, attribute
//! extraction, per-page merge, catalog matching.

use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use crate::attributes::AttributeSet;
use crate::config::{ConfigError, EmbeddingChoice, LlmChoice, PipelineConfig};
use crate::exec::{self, Execution};
use crate::extract::{
    Backoff, HttpLlm, LlmBackend, MockLlm, ModelParams, PageExtractor, PromptTemplate, Templates,
};
use crate::ingest::{
    clean_images, extract_images, extract_text_native, extract_text_ocr, load_document, preprocess_raster,
    rasterize_page, CommandOcr, Document, IngestError, OcrEngine, Page, SpellCorrector, TextBlock, WordMapCorrector,
};
use crate::matching::{load_catalog, CatalogEntry, EmbeddingProvider, HttpEmbedding, MatchResult, Matcher, MockTrigramProvider};
use crate::normalize::{filter_boilerplate, merge_attribute_sets, AliasTable, BoilerplateRules, MergedPageAttributes};
use crate::warning::{Warning, WarningKind};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Report(#[from] crate::report::ReportError),
}

/// Loaded backends and tables for a run.
pub struct Runtime {
    pub llm: Box<dyn LlmBackend>,
    pub embedder: Box<dyn EmbeddingProvider>,
    pub ocr: Option<Box<dyn OcrEngine>>,
    pub corrector: Option<Box<dyn SpellCorrector>>,
    pub aliases: AliasTable,
    pub boilerplate: BoilerplateRules,
    /// `None` skips the match stage.
    pub catalog: Option<Vec<CatalogEntry>>,
    pub templates: Templates,
    pub params: ModelParams,
    pub backoff: Backoff,
}

fn setup(msg: impl std::fmt::Display) -> ConfigError {
    ConfigError::Invalid(msg.to_string())
}

impl Runtime {
    pub fn from_config(cfg: &PipelineConfig) -> Result<Self, ConfigError> {
        let llm: Box<dyn LlmBackend> = match &cfg.llm {
            LlmChoice::Mock { lexicon } => Box::new(MockLlm::load(lexicon).map_err(setup)?),
            LlmChoice::Http { endpoint, model } => Box::new(HttpLlm::from_env(endpoint.clone(), model.clone())),
        };
        let embedder: Box<dyn EmbeddingProvider> = match &cfg.embedding {
            EmbeddingChoice::Mock { dim } => Box::new(MockTrigramProvider::new(*dim)),
            EmbeddingChoice::Http { endpoint, model } => {
                Box::new(HttpEmbedding::from_env(endpoint.clone(), model.clone()))
            }
        };
        let aliases = match &cfg.aliases {
            Some(p) => AliasTable::load(p).map_err(setup)?,
            None => AliasTable::builtin(),
        };
        let catalog = match &cfg.catalog {
            Some(p) => Some(load_catalog(p, &aliases).map_err(setup)?),
            None => None,
        };
        let ocr = cfg.ocr_command.as_ref().map(|cmd| -> Box<dyn OcrEngine> {
            Box::new(CommandOcr::new(cmd[0].clone(), cmd[1..].to_vec()))
        });
        let corrector = match &cfg.corrections {
            Some(p) => Some(Box::new(
                WordMapCorrector::load(p).map_err(|e| setup(format!("{}: {e}", p.display())))?,
            ) as Box<dyn SpellCorrector>),
            None => None,
        };
        let boilerplate = BoilerplateRules::default()
            .with_patterns(&cfg.boilerplate_patterns)
            .map_err(|e| setup(format!("boilerplate pattern: {e}")))?;
        let text = PromptTemplate::builtin(&cfg.prompt_id)
            .ok_or_else(|| setup(format!("unknown prompt {:?}", cfg.prompt_id)))?;
        Ok(Runtime {
            llm,
            embedder,
            ocr,
            corrector,
            aliases,
            boilerplate,
            catalog,
            templates: Templates {
                text,
                image: PromptTemplate::default_image(),
            },
            params: ModelParams {
                temperature: cfg.temperature,
                max_retries: cfg.max_retries,
                backend_id: match cfg.llm {
                    LlmChoice::Mock { .. } => "mock".into(),
                    LlmChoice::Http { .. } => "http".into(),
                },
            },
            backoff: Backoff::default(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PageReport {
    pub page: usize,
    pub text_attributes: AttributeSet,
    pub image_attributes: Vec<AttributeSet>,
    pub merged: MergedPageAttributes,
    pub matches: Vec<MatchResult>,
}

impl PageReport {
    pub fn hashtags(&self) -> Vec<&str> {
        self.merged.hashtags.iter().map(|h| h.tag.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DocumentReport {
    /// File name of the source PDF.
    pub document: String,
    pub source: PathBuf,
    /// Ascending page order.
    pub pages: Vec<PageReport>,
    /// Stage name and wall-clock milliseconds, in execution order, ending
    /// with `total`.
    pub timings_ms: Vec<(String, f64)>,
    pub warnings: Vec<Warning>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DocumentFailure {
    pub document: String,
    pub source: PathBuf,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunReport {
    pub documents: Vec<DocumentReport>,
    pub failures: Vec<DocumentFailure>,
    pub timings: bool,
}

impl RunReport {
    /// 0 when every document was processed, 1 when any failed outright.
    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() {
            0
        } else {
            1
        }
    }
}

fn document_name(path: &Path) -> String {
    path.file_name()
        .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

/// Expands directories into their `*.pdf` files (sorted, non-recursive).
pub fn collect_inputs(inputs: &[PathBuf]) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .into_iter()
                .flatten()
                .flatten()
                .map(|e| e.path())
                .filter(|f| {
                    f.is_file() && f.extension().is_some_and(|e| e.eq_ignore_ascii_case("pdf"))
                })
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    out
}

/// Runs every input document and, when an output directory is configured,
/// writes the report files after all documents are done.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunReport, PipelineError> {
    cfg.validate()?;
    let rt = Runtime::from_config(cfg)?;
    let report = run_with(cfg, &rt)?;
    if let Some(dir) = &cfg.output_dir {
        crate::report::emit_report(&report, dir, cfg.format)?;
    }
    Ok(report)
}

/// [`run_pipeline`] with caller-provided backends; writes nothing.
pub fn run_with(cfg: &PipelineConfig, rt: &Runtime) -> Result<RunReport, PipelineError> {
    let exec = Execution::with_limit(cfg.concurrency);
    let matcher = Matcher::new(rt.embedder.as_ref(), cfg.threshold)
        .map_err(setup)?
        .exec(exec);
    let mut report = RunReport {
        timings: cfg.timings,
        ..RunReport::default()
    };
    for path in collect_inputs(&cfg.inputs) {
        match exec::scoped(exec, || process_document(&path, cfg, rt, &matcher, exec)) {
            Ok(doc) => report.documents.push(doc),
            Err(e) => {
                log::error!("{}: {e}", path.display());
                report.failures.push(DocumentFailure {
                    document: document_name(&path),
                    source: path.clone(),
                    error: e.to_string(),
                });
            }
        }
    }
    Ok(report)
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1000.0
}

/// Native text for a page, falling back to OCR when the page has none.
fn page_text(
    doc: &Document,
    index: usize,
    cfg: &PipelineConfig,
    rt: &Runtime,
    ocr_lock: &Mutex<()>,
    warnings: &mut Vec<Warning>,
) -> Result<Vec<TextBlock>, IngestError> {
    let native = extract_text_native(doc, index)?;
    warnings.extend(native.warnings);
    if native.items.iter().any(|b| !b.text.trim().is_empty()) {
        return Ok(native.items);
    }
    let Some(engine) = rt.ocr.as_deref() else {
        return Ok(native.items);
    };
    let raster = preprocess_raster(&rasterize_page(doc, index, cfg.dpi)?);
    let result = if engine.is_serial() {
        let _g = ocr_lock.lock().unwrap_or_else(|p| p.into_inner());
        extract_text_ocr(&raster, engine, index)
    } else {
        extract_text_ocr(&raster, engine, index)
    };
    match result {
        Ok(blocks) => {
            warnings.push(Warning::new(
                WarningKind::OcrFallback,
                Some(index),
                "no native text layer; text recognised from the page image",
            ));
            Ok(blocks)
        }
        Err(e) => {
            warnings.push(Warning::new(WarningKind::OcrFallback, Some(index), format!("OCR failed: {e}")));
            Ok(Vec::new())
        }
    }
}

fn extract_content(
    doc: &Document,
    cfg: &PipelineConfig,
    rt: &Runtime,
    exec: Execution,
) -> Result<(Vec<Page>, Vec<Warning>), IngestError> {
    let ocr_lock = Mutex::new(());
    let indices: Vec<usize> = (0..doc.page_count()).collect();
    let per_page = exec::map(exec, &indices, |_, &i| -> Result<_, IngestError> {
        let mut warnings = Vec::new();
        let blocks = page_text(doc, i, cfg, rt, &ocr_lock, &mut warnings)?;
        let images = if cfg.no_images {
            Vec::new()
        } else {
            let found = extract_images(doc, i)?;
            warnings.extend(found.warnings);
            clean_images(found.items, &cfg.clean)
        };
        Ok((blocks, images, warnings))
    });

    let mut all_blocks = Vec::new();
    let mut pages = Vec::with_capacity(indices.len());
    let mut warnings = Vec::new();
    for (i, r) in per_page.into_iter().enumerate() {
        let (blocks, images, w) = r?;
        all_blocks.extend(blocks);
        warnings.extend(w);
        pages.push(Page {
            index: i,
            text_blocks: Vec::new(),
            images,
        });
    }
    for b in filter_boilerplate(&all_blocks, pages.len(), &rt.boilerplate) {
        pages[b.page_index].text_blocks.push(b);
    }
    Ok((pages, warnings))
}

fn process_document(
    path: &Path,
    cfg: &PipelineConfig,
    rt: &Runtime,
    matcher: &Matcher<'_>,
    exec: Execution,
) -> Result<DocumentReport, IngestError> {
    let start = Instant::now();
    let mut timings = Vec::new();
    let mut warnings = Vec::new();

    let t = Instant::now();
    let doc = load_document(path)?;
    let (pages, w) = extract_content(&doc, cfg, rt, exec)?;
    warnings.extend(w);
    timings.push(("extract_content".to_string(), ms(t)));

    let t = Instant::now();
    let extractor = PageExtractor::new(rt.llm.as_ref(), &rt.templates, &rt.params)
        .backoff(rt.backoff)
        .exec(exec)
        .corrector(rt.corrector.as_deref());
    let extracted = exec::map(exec, &pages, |_, p| extractor.extract(p));
    timings.push(("extract_attributes".to_string(), ms(t)));

    let t = Instant::now();
    let mut reports = Vec::with_capacity(pages.len());
    for (page, ex) in pages.iter().zip(extracted) {
        warnings.extend(ex.warnings);
        let mut sets = Vec::with_capacity(1 + ex.image_sets.len());
        sets.push(ex.text_set.clone());
        sets.extend(ex.image_sets.iter().cloned());
        let merged = merge_attribute_sets(&sets, &rt.aliases, ex.hashtags)
            .expect("sets of one page with non-empty values always merge");
        reports.push(PageReport {
            page: page.index,
            text_attributes: ex.text_set,
            image_attributes: ex.image_sets,
            merged,
            matches: Vec::new(),
        });
    }
    timings.push(("merge".to_string(), ms(t)));

    if let Some(catalog) = &rt.catalog {
        let t = Instant::now();
        let results = exec::map(exec, &reports, |_, r| matcher.match_page(&r.merged, catalog));
        for (r, m) in reports.iter_mut().zip(results) {
            match m {
                Ok(m) => r.matches = m,
                Err(e) => warnings.push(Warning::new(WarningKind::BackendFailure, Some(r.page), e.to_string())),
            }
        }
        timings.push(("match".to_string(), ms(t)));
    }
    timings.push(("total".to_string(), ms(start)));

    Ok(DocumentReport {
        document: document_name(path),
        source: path.to_path_buf(),
        pages: reports,
        timings_ms: timings,
        warnings,
    })
}
