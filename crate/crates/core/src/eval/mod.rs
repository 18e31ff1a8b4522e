//! Scoring predictions against annotated ground truth.

mod metrics;
mod score;
mod truth;

pub use metrics::{
    accuracy, aggregate_report, compare_key, compare_page, evaluate, f1, f1_from, format_percent, per_attribute_accuracy,
    precision, recall, DatasetRow, DatasetTable, MetricCounts, MetricsReport,
};
pub use score::{score_document, DocumentScores};
pub use truth::GroundTruth;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("ground truth {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("ground truth: {0}")]
    Parse(String),
    #[error("pages {0:?} have predictions but no ground truth")]
    MissingPages(Vec<usize>),
    #[error("no datasets to aggregate")]
    NoDatasets,
}
