use std::sync::Mutex;

use super::{
    build_image_prompt, build_text_prompt, extract_hashtags, parse_attribute_response, query_llm_with, Backoff,
    ExtractError, Hashtag, LlmBackend, ModelParams, PromptTemplate, ResponseOrigin,
};
use crate::attributes::{AttributeSet, SetSource};
use crate::exec::{self, Execution};
use crate::ingest::{correct_blocks, Page, SpellCorrector, TextBlock};
use crate::warning::{Warning, WarningKind};

#[derive(Debug, Clone)]
pub struct Templates {
    pub text: PromptTemplate,
    pub image: PromptTemplate,
}

impl Default for Templates {
    fn default() -> Self {
        Templates {
            text: PromptTemplate::default_text(),
            image: PromptTemplate::default_image(),
        }
    }
}

/// A failed backend call. The corresponding set is left all-sentinel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallError {
    pub page_index: usize,
    /// `None` for the text call.
    pub image_hash: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PageExtraction {
    pub text_set: AttributeSet,
    /// One per image, in image order.
    pub image_sets: Vec<AttributeSet>,
    pub hashtags: Vec<Hashtag>,
    pub errors: Vec<CallError>,
    pub warnings: Vec<Warning>,
}

/// Per-page attribute extraction with the knobs the pipeline needs.
pub struct PageExtractor<'a> {
    pub backend: &'a dyn LlmBackend,
    pub templates: &'a Templates,
    pub params: &'a ModelParams,
    pub backoff: Backoff,
    pub exec: Execution,
    /// Applied to OCR-origin text only.
    pub corrector: Option<&'a dyn SpellCorrector>,
    serial: Mutex<()>,
}

enum Job {
    Text,
    Image(usize),
}

impl<'a> PageExtractor<'a> {
    pub fn new(backend: &'a dyn LlmBackend, templates: &'a Templates, params: &'a ModelParams) -> Self {
        PageExtractor {
            backend,
            templates,
            params,
            backoff: Backoff::default(),
            exec: Execution::default(),
            corrector: None,
            serial: Mutex::new(()),
        }
    }

    pub fn backoff(mut self, backoff: Backoff) -> Self {
        self.backoff = backoff;
        self
    }

    pub fn exec(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn corrector(mut self, corrector: Option<&'a dyn SpellCorrector>) -> Self {
        self.corrector = corrector;
        self
    }

    fn corrected(&self, blocks: &[TextBlock]) -> Vec<TextBlock> {
        match self.corrector {
            None => blocks.to_vec(),
            Some(c) if c.is_serial() => {
                let _guard = self.serial.lock().unwrap_or_else(|p| p.into_inner());
                correct_blocks(blocks, c)
            }
            Some(c) => correct_blocks(blocks, c),
        }
    }

    /// Text call and one call per image, run concurrently up to the
    /// execution limit. Results come back in image order regardless of
    /// completion order.
    pub fn extract(&self, page: &Page) -> PageExtraction {
        let raw_text = page.text();
        let hashtags = extract_hashtags(&raw_text, page.index);
        let text = self
            .corrected(&page.text_blocks)
            .iter()
            .map(|b| b.text.as_str())
            .collect::<Vec<_>>()
            .join("\n");

        let mut jobs = vec![Job::Text];
        jobs.extend((0..page.images.len()).map(Job::Image));
        let results = exec::map(self.exec, &jobs, |_, job| match job {
            Job::Text => {
                if text.trim().is_empty() {
                    return (AttributeSet::empty(SetSource::Text, page.index), Vec::new(), None);
                }
                let call = build_text_prompt(&self.templates.text, &text)
                    .and_then(|req| query_llm_with(self.backend, &req, self.params, &self.backoff));
                self.finish(call, page.index, ResponseOrigin::Text)
            }
            Job::Image(i) => {
                let img = &page.images[*i];
                let call = build_image_prompt(&self.templates.image, img)
                    .and_then(|req| query_llm_with(self.backend, &req, self.params, &self.backoff));
                self.finish(call, page.index, ResponseOrigin::Image(img.content_hash.to_hex()))
            }
        });

        let mut out = PageExtraction {
            text_set: AttributeSet::empty(SetSource::Text, page.index),
            image_sets: Vec::with_capacity(page.images.len()),
            hashtags,
            errors: Vec::new(),
            warnings: Vec::new(),
        };
        for (job, (set, warnings, err)) in jobs.iter().zip(results) {
            match job {
                Job::Text => out.text_set = set,
                Job::Image(_) => out.image_sets.push(set),
            }
            out.warnings.extend(warnings);
            out.errors.extend(err);
        }
        out
    }

    fn finish(
        &self,
        call: Result<super::LlmResponse, ExtractError>,
        page_index: usize,
        origin: ResponseOrigin,
    ) -> (AttributeSet, Vec<Warning>, Option<CallError>) {
        match call {
            Ok(resp) => {
                let parsed = parse_attribute_response(&resp.text, page_index, origin);
                (parsed.set, parsed.warnings, None)
            }
            Err(e) => {
                let hash = match &origin {
                    ResponseOrigin::Text => None,
                    ResponseOrigin::Image(h) => Some(h.clone()),
                };
                let set = match &hash {
                    None => AttributeSet::empty(SetSource::Text, page_index),
                    Some(h) => AttributeSet::for_image(page_index, h.clone()),
                };
                let message = e.to_string();
                let warning = Warning::new(WarningKind::BackendFailure, Some(page_index), message.clone());
                (
                    set,
                    vec![warning],
                    Some(CallError {
                        page_index,
                        image_hash: hash,
                        message,
                    }),
                )
            }
        }
    }
}

/// [`PageExtractor`] with default backoff and concurrency.
pub fn extract_page_attributes(
    page: &Page,
    backend: &dyn LlmBackend,
    templates: &Templates,
    params: &ModelParams,
) -> PageExtraction {
    PageExtractor::new(backend, templates, params).extract(page)
}
