//! Prompting, LLM backends, response parsing and hashtag detection.

mod hashtag;
mod llm;
mod page;
mod parse;
mod prompt;

pub use hashtag::{extract_hashtags, Hashtag};
pub use llm::{
    query_llm, query_llm_with, Backoff, BackendError, HttpLlm, LlmBackend, MockLlm, ModelParams,
    DEFAULT_TEMPERATURE,
};
pub use page::{extract_page_attributes, CallError, PageExtraction, PageExtractor, Templates};
pub use parse::{format_attribute_set, parse_attribute_response, ParsedAttributes, ResponseOrigin};
pub use prompt::{
    build_image_prompt, build_text_prompt, encode_image_base64, InlineImage, LlmRequest, LlmResponse,
    Modality, PromptTemplate, PLACEHOLDER,
};

use crate::ingest::ImageFormat;

#[derive(Debug, thiserror::Error)]
pub enum ExtractError {
    #[error("text payload is empty")]
    EmptyText,
    #[error("template modality is {found:?}, expected {expected:?}")]
    WrongModality { expected: Modality, found: Modality },
    #[error("image has no bytes")]
    EmptyImage,
    #[error("image format {0:?} cannot be sent inline")]
    UnsupportedFormat(ImageFormat),
    #[error("invalid prompt template: {0}")]
    InvalidTemplate(String),
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
    #[error("backend unavailable after {attempts} attempt(s): {message}")]
    BackendUnavailable { attempts: u32, message: String },
    #[error("backend rejected the request: {0}")]
    BackendRejected(String),
    #[error("lexicon: {0}")]
    Lexicon(String),
}
