use std::collections::HashSet;
use std::path::Path;

use super::MatchError;
use crate::attributes::AttributeKey;
use crate::normalize::{canonicalize_value, AliasTable};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CatalogEntry {
    pub attribute: AttributeKey,
    /// Canonicalized at load time.
    pub value: String,
    pub category: Option<String>,
}

fn violation(line: u64, message: impl Into<String>) -> MatchError {
    MatchError::SchemaViolation {
        line,
        message: message.into(),
    }
}

/// Parses `attribute,value[,category]` CSV with a header row. Values are
/// canonicalized and repeated (attribute, value) pairs keep their first row.
pub fn parse_catalog(src: &str, aliases: &AliasTable) -> Result<Vec<CatalogEntry>, MatchError> {
    if src.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(src.as_bytes());
    let header = rdr.headers().map_err(|e| violation(1, e.to_string()))?.clone();
    let names: Vec<String> = header.iter().map(str::to_lowercase).collect();
    let has_category = match names.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["attribute", "value"] => false,
        ["attribute", "value", "category"] => true,
        _ => return Err(violation(1, format!("expected header attribute,value[,category], got {names:?}"))),
    };
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            violation(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let width = if has_category { 3 } else { 2 };
        if rec.len() != width && !(has_category && rec.len() == 2) {
            return Err(violation(line, format!("expected {width} fields, found {}", rec.len())));
        }
        let attribute =
            AttributeKey::lookup(&rec[0]).ok_or_else(|| violation(line, format!("unknown attribute {:?}", &rec[0])))?;
        let value = canonicalize_value(&rec[1], aliases).map_err(|_| violation(line, "empty value"))?;
        let category = rec.get(2).filter(|c| !c.is_empty()).map(str::to_string);
        if seen.insert((attribute, value.clone())) {
            out.push(CatalogEntry {
                attribute,
                value,
                category,
            });
        }
    }
    Ok(out)
}

pub fn load_catalog(path: &Path, aliases: &AliasTable) -> Result<Vec<CatalogEntry>, MatchError> {
    let src = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => MatchError::FileNotFound(path.display().to_string()),
        _ => violation(0, format!("{}: {e}", path.display())),
    })?;
    parse_catalog(&src, aliases)
}
