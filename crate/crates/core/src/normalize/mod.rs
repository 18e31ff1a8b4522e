//! Value canonicalization, per-page merging and header/footer removal.

mod alias;
mod boilerplate;
mod merge;

pub use alias::{canonicalize_value, lookup_key, title_case, AliasTable};
pub use boilerplate::{filter_boilerplate, BoilerplateRules};
pub use merge::{merge_attribute_sets, MergedPageAttributes, Provenance, Source};

#[derive(Debug, thiserror::Error)]
pub enum NormalizeError {
    #[error("value is empty")]
    EmptyValue,
    #[error("cannot merge sets from different pages ({0} and {1})")]
    MixedPages(usize, usize),
    #[error("nothing to merge")]
    NoInput,
    #[error("alias table line {line}: {message}")]
    AliasConflict { line: usize, message: String },
    #[error("alias table {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
