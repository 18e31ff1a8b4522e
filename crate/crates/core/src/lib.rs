//! Product attribute extraction from PDF trend reports.
//!
//! Stages: [`ingest`] reads pages, [`extract`] asks an LLM backend for
//! attributes, [`normalize`] canonicalizes and merges them per page,
//! [`matching`] maps them onto a catalog and [`eval`] scores them.
//! [`pipeline`] wires everything together.

pub mod attributes;
pub mod bench;
pub mod config;
pub mod eval;
pub mod exec;
pub mod extract;
pub mod ingest;
pub mod matching;
pub mod normalize;
pub mod pipeline;
pub mod png;
pub mod report;
pub mod synth;
pub mod warning;

pub use attributes::{AttributeKey, AttributeSet, SetSource, NOT_MENTIONED};
pub use warning::{Warning, WarningKind, WithWarnings};
