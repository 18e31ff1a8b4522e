//! Catalog matching by embedding cosine similarity, per attribute key.

mod catalog;
mod embed;
mod matcher;

pub use catalog::{load_catalog, parse_catalog, CatalogEntry};
pub use embed::{cosine_similarity, EmbeddingProvider, EmbeddingVector, HttpEmbedding, MockTrigramProvider};
pub use matcher::{match_attributes, MatchResult, Matcher, DEFAULT_THRESHOLD};

#[derive(Debug, thiserror::Error)]
pub enum MatchError {
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("vector dimensions differ ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("embedding provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("embedding {value:?}: {source}")]
    Provider {
        value: String,
        #[source]
        source: Box<MatchError>,
    },
    #[error("catalog not found: {0}")]
    FileNotFound(String),
    #[error("catalog line {line}: {message}")]
    SchemaViolation { line: u64, message: String },
    #[error("threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),
}
