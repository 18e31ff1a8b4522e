use std::fmt;

use serde::Serialize;

/// A non-fatal problem encountered while processing a document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Warning {
    pub kind: WarningKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub page: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WarningKind {
    MalformedContentStream,
    ImageDecodeFailure,
    OcrFallback,
    ParseWarning,
    BackendFailure,
    SpellCorrection,
}

impl Warning {
    pub fn new(kind: WarningKind, page: Option<usize>, message: impl Into<String>) -> Self {
        Warning {
            kind,
            page,
            message: message.into(),
        }
    }
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.page {
            Some(p) => write!(f, "page {p}: {:?}: {}", self.kind, self.message),
            None => write!(f, "{:?}: {}", self.kind, self.message),
        }
    }
}

/// Items produced by an operation together with the warnings it raised.
#[derive(Debug, Clone, PartialEq)]
pub struct WithWarnings<T> {
    pub items: Vec<T>,
    pub warnings: Vec<Warning>,
}

impl<T> WithWarnings<T> {
    pub fn clean(items: Vec<T>) -> Self {
        WithWarnings {
            items,
            warnings: Vec::new(),
        }
    }
}
