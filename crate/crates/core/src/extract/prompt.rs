use std::ops::Range;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::ExtractError;
use crate::ingest::ExtractedImage;

/// Marker replaced by the page text in text-modality templates.
pub const PLACEHOLDER: &str = "{text}";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Text,
    Image,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    id: String,
    body: String,
    modality: Modality,
}

const DEFAULT_TEXT: &str = "Generate me color, sleeve style, product type, material, features, categories, age and neck attributes from the following text:\n{text}";

const PROMPT_1: &str = "Give me all clothing characteristics of a product from the following text:\n{text}";

const PROMPT_2: &str = "Give me color, sleeve style, product type, material, cloth features, categories, and neck attributes from the following text:\n{text}";

const PROMPT_3: &str = "I want you to act as a product attribute extractor in retail space. Given the unstructured text data, you need to find different product attributes in the text. For example: For Input as 'Long contrast fabric Sleeve red cotton adult polo shirts for men with contemporary design element', the attribute extractor will return color attribute is red, sleeve attribute is Long, style sleeve attribute is contrast fabric, product type attribute is polo shirts, material attribute is cotton, feature attribute is contemporary, categories is polo shirts, gender attribute is men and neck attribute is NA. Give me attributes like color, sleeve style, product type, material, features, categories, and neck attributes from the following text:\n{text}";

const IMAGE_DEFAULT: &str = "Generate a list format color, sleeve style, product type, material attributes from the below image. Also give me features, categories, age and neck attributes from below image.";

impl PromptTemplate {
    /// Validates the placeholder count for the modality: exactly one for
    /// text, none for image (the image travels inline).
    pub fn new(id: impl Into<String>, body: impl Into<String>, modality: Modality) -> Result<Self, ExtractError> {
        let id = id.into();
        let body = body.into();
        let n = body.matches(PLACEHOLDER).count();
        let expected = match modality {
            Modality::Text => 1,
            Modality::Image => 0,
        };
        if n != expected {
            return Err(ExtractError::InvalidTemplate(format!(
                "template {id:?} has {n} {PLACEHOLDER} placeholders, expected {expected}"
            )));
        }
        Ok(PromptTemplate { id, body, modality })
    }

    /// Built-in templates: `default`, `prompt1`, `prompt2`, `prompt3` (text)
    /// and `image`.
    pub fn builtin(id: &str) -> Option<PromptTemplate> {
        let (body, modality) = match id {
            "default" => (DEFAULT_TEXT, Modality::Text),
            "prompt1" => (PROMPT_1, Modality::Text),
            "prompt2" => (PROMPT_2, Modality::Text),
            "prompt3" => (PROMPT_3, Modality::Text),
            "image" => (IMAGE_DEFAULT, Modality::Image),
            _ => return None,
        };
        Some(PromptTemplate {
            id: id.to_string(),
            body: body.to_string(),
            modality,
        })
    }

    pub fn default_text() -> PromptTemplate {
        PromptTemplate::builtin("default").expect("builtin")
    }

    pub fn default_image() -> PromptTemplate {
        PromptTemplate::builtin("image").expect("builtin")
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InlineImage {
    #[serde(rename = "mimeType")]
    pub mime_type: String,
    /// Standard base64 with padding.
    pub data: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LlmRequest {
    pub text: String,
    pub image: Option<InlineImage>,
    /// Byte range of the substituted page text within `text`. Only local
    /// backends look at it; it is never sent over the wire.
    pub payload: Option<Range<usize>>,
}

impl LlmRequest {
    pub fn payload_text(&self) -> &str {
        match &self.payload {
            Some(r) => &self.text[r.clone()],
            None => &self.text,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlmResponse {
    pub text: String,
    pub latency_ms: f64,
}

/// Substitutes `text` for the placeholder; nothing else in the body changes.
pub fn build_text_prompt(tpl: &PromptTemplate, text: &str) -> Result<LlmRequest, ExtractError> {
    if tpl.modality != Modality::Text {
        return Err(ExtractError::WrongModality {
            expected: Modality::Text,
            found: tpl.modality,
        });
    }
    if text.trim().is_empty() {
        return Err(ExtractError::EmptyText);
    }
    let at = tpl.body.find(PLACEHOLDER).expect("validated template");
    let mut out = String::with_capacity(tpl.body.len() + text.len());
    out.push_str(&tpl.body[..at]);
    out.push_str(text);
    out.push_str(&tpl.body[at + PLACEHOLDER.len()..]);
    Ok(LlmRequest {
        text: out,
        image: None,
        payload: Some(at..at + text.len()),
    })
}

pub fn encode_image_base64(img: &ExtractedImage) -> Result<String, ExtractError> {
    if img.bytes.is_empty() {
        return Err(ExtractError::EmptyImage);
    }
    Ok(STANDARD.encode(&img.bytes))
}

pub fn build_image_prompt(tpl: &PromptTemplate, img: &ExtractedImage) -> Result<LlmRequest, ExtractError> {
    if tpl.modality != Modality::Image {
        return Err(ExtractError::WrongModality {
            expected: Modality::Image,
            found: tpl.modality,
        });
    }
    let mime = img
        .format
        .mime_type()
        .ok_or(ExtractError::UnsupportedFormat(img.format))?;
    Ok(LlmRequest {
        text: tpl.body.clone(),
        image: Some(InlineImage {
            mime_type: mime.to_string(),
            data: encode_image_base64(img)?,
        }),
        payload: None,
    })
}
