//! Report files: one JSON (or text table) per document plus a run summary.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::attributes::{AttributeKey, AttributeSet, SetSource, NOT_MENTIONED};
use crate::config::OutputFormat;
use crate::matching::MatchResult;
use crate::pipeline::{DocumentReport, RunReport};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("report {0}")]
    Malformed(String),
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// `{"Color": [..], ..}` in canonical key order.
pub fn attribute_map(set: &AttributeSet) -> Map<String, Value> {
    set.iter()
        .map(|(k, v)| (k.display_name().to_string(), json!(v)))
        .collect()
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

pub fn match_json(m: &MatchResult) -> Value {
    json!({
        "attribute": m.attribute.display_name(),
        "predicted": m.predicted_value,
        "catalog": m.best_catalog_value,
        "similarity": round6(m.similarity),
        "matched": m.matched,
    })
}

pub fn timings_json(timings: &[(String, f64)], enabled: bool) -> Value {
    let mut m = Map::new();
    if enabled {
        for (stage, v) in timings {
            m.insert(stage.clone(), json!((v * 1000.0).round() / 1000.0));
        }
    }
    Value::Object(m)
}

pub fn document_json(doc: &DocumentReport, timings: bool) -> Value {
    let pages: Vec<Value> = doc
        .pages
        .iter()
        .map(|p| {
            let images: Vec<Value> = p
                .image_attributes
                .iter()
                .map(|s| {
                    let mut m = Map::new();
                    m.insert("image_hash".into(), json!(s.image_hash));
                    m.extend(attribute_map(s));
                    Value::Object(m)
                })
                .collect();
            json!({
                "page": p.page,
                "text_attributes": attribute_map(&p.text_attributes),
                "image_attributes": images,
                "merged": attribute_map(&p.merged.attributes),
                "hashtags": p.hashtags(),
                "matches": p.matches.iter().map(match_json).collect::<Vec<_>>(),
            })
        })
        .collect();
    json!({
        "document": doc.document,
        "pages": pages,
        "timings_ms": timings_json(&doc.timings_ms, timings),
    })
}

pub fn summary_json(report: &RunReport) -> Value {
    let mut docs: Vec<Value> = report
        .documents
        .iter()
        .map(|d| {
            json!({
                "document": d.document,
                "status": "ok",
                "pages": d.pages.len(),
                "warnings": d.warnings,
            })
        })
        .collect();
    docs.extend(report.failures.iter().map(|f| {
        json!({
            "document": f.document,
            "status": "failed",
            "error": f.error,
        })
    }));
    json!({
        "documents": docs,
        "failed": report.failures.len(),
    })
}

/// Pretty JSON with a trailing newline.
pub fn to_pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

fn fmt_values(set: &AttributeSet, key: AttributeKey) -> String {
    set.get(key).join("; ")
}

fn table_block(out: &mut String, title: &str, set: &AttributeSet) {
    let _ = writeln!(out, "  {title}");
    for key in AttributeKey::ALL {
        let _ = writeln!(out, "    {:<13} {}", key.display_name(), fmt_values(set, key));
    }
}

pub fn render_document_table(doc: &DocumentReport, timings: bool) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Document: {}", doc.document);
    for p in &doc.pages {
        let _ = writeln!(out, "\nPage {}", p.page);
        let tags = p.hashtags();
        let _ = writeln!(
            out,
            "  Hashtags: {}",
            if tags.is_empty() {
                "(none)".to_string()
            } else {
                tags.iter().map(|t| format!("#{t}")).collect::<Vec<_>>().join(" ")
            }
        );
        table_block(&mut out, "Merged", &p.merged.attributes);
        table_block(&mut out, "Text", &p.text_attributes);
        for s in &p.image_attributes {
            let hash = s.image_hash.as_deref().unwrap_or("");
            table_block(&mut out, &format!("Image {}", &hash[..hash.len().min(12)]), s);
        }
        if !p.matches.is_empty() {
            let _ = writeln!(out, "  Matches");
            for m in &p.matches {
                let _ = writeln!(
                    out,
                    "    {:<13} {} -> {} ({:.3}) {}",
                    m.attribute.display_name(),
                    m.predicted_value,
                    m.best_catalog_value.as_deref().unwrap_or("-"),
                    m.similarity,
                    if m.matched { "matched" } else { "unmatched" }
                );
            }
        }
    }
    if timings && !doc.timings_ms.is_empty() {
        let _ = writeln!(out, "\nTimings (ms)");
        for (stage, v) in &doc.timings_ms {
            let _ = writeln!(out, "  {stage:<20} {v:.1}");
        }
    }
    out
}

pub fn render_summary_table(report: &RunReport) -> String {
    let mut out = String::new();
    for d in &report.documents {
        let _ = writeln!(out, "{}: ok, {} page(s), {} warning(s)", d.document, d.pages.len(), d.warnings.len());
        for w in &d.warnings {
            let _ = writeln!(out, "  {w}");
        }
    }
    for f in &report.failures {
        let _ = writeln!(out, "{}: FAILED: {}", f.document, f.error);
    }
    if report.documents.is_empty() && report.failures.is_empty() {
        out.push_str("no documents\n");
    }
    out
}

/// Writes `contents` via a temporary sibling so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), ReportError> {
    let tmp = path.with_extension("tmp~");
    std::fs::write(&tmp, contents).map_err(io(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io(path))
}

/// Unique output stems: `a.pdf` and `x/a.pdf` become `a` and `a-2`.
fn stems(report: &RunReport) -> Vec<String> {
    let mut used = HashSet::new();
    report
        .documents
        .iter()
        .map(|d| {
            let base = Path::new(&d.document)
                .file_stem()
                .map_or_else(|| d.document.clone(), |s| s.to_string_lossy().into_owned());
            let mut name = base.clone();
            let mut n = 2;
            while !used.insert(name.clone()) || name == "summary" {
                name = format!("{base}-{n}");
                n += 1;
            }
            name
        })
        .collect()
}

/// Writes every document report and the summary into `dir`; returns the
/// written paths in order.
pub fn emit_report(report: &RunReport, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>, ReportError> {
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let mut written = Vec::new();
    for (doc, stem) in report.documents.iter().zip(stems(report)) {
        let (path, body) = match format {
            OutputFormat::Json => (dir.join(format!("{stem}.json")), to_pretty(&document_json(doc, report.timings))),
            OutputFormat::Table => (dir.join(format!("{stem}.txt")), render_document_table(doc, report.timings)),
        };
        write_atomic(&path, &body)?;
        written.push(path);
    }
    let (path, body) = match format {
        OutputFormat::Json => (dir.join("summary.json"), to_pretty(&summary_json(report))),
        OutputFormat::Table => (dir.join("summary.txt"), render_summary_table(report)),
    };
    write_atomic(&path, &body)?;
    written.push(path);
    Ok(written)
}

/// A page read back from a JSON document report.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedPage {
    pub page: usize,
    pub text: AttributeSet,
    pub images: Vec<AttributeSet>,
    pub merged: AttributeSet,
}

fn malformed(msg: impl Into<String>) -> ReportError {
    ReportError::Malformed(msg.into())
}

fn read_set(v: &Value, source: SetSource, page: usize, hash: Option<String>) -> Result<AttributeSet, ReportError> {
    let obj = v.as_object().ok_or_else(|| malformed(format!("page {page}: attribute map expected")))?;
    let mut set = AttributeSet::empty(source, page);
    set.image_hash = hash;
    for (name, values) in obj {
        if name == "image_hash" {
            continue;
        }
        let key = AttributeKey::lookup(name).ok_or_else(|| malformed(format!("page {page}: unknown attribute {name:?}")))?;
        let values = values
            .as_array()
            .ok_or_else(|| malformed(format!("page {page} {name}: array expected")))?;
        let values: Vec<&str> = values.iter().filter_map(Value::as_str).filter(|s| *s != NOT_MENTIONED).collect();
        set.set_values(key, values);
    }
    Ok(set)
}

/// Reads the attribute sets back out of a document report.
pub fn parse_document(v: &Value) -> Result<Vec<SavedPage>, ReportError> {
    let pages = v
        .get("pages")
        .and_then(Value::as_array)
        .ok_or_else(|| malformed("has no \"pages\" array"))?;
    pages
        .iter()
        .map(|p| {
            let page = p
                .get("page")
                .and_then(Value::as_u64)
                .ok_or_else(|| malformed("page without index"))? as usize;
            let field = |name: &str| p.get(name).ok_or_else(|| malformed(format!("page {page}: missing {name:?}")));
            let images = field("image_attributes")?
                .as_array()
                .ok_or_else(|| malformed(format!("page {page}: image_attributes must be an array")))?
                .iter()
                .map(|img| {
                    let hash = img.get("image_hash").and_then(Value::as_str).map(str::to_string);
                    read_set(img, SetSource::Image, page, hash.or_else(|| Some(String::new())))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(SavedPage {
                page,
                text: read_set(field("text_attributes")?, SetSource::Text, page, None)?,
                images,
                merged: read_set(field("merged")?, SetSource::Merged, page, None)?,
            })
        })
        .collect()
}
