use crate::attributes::AttributeSet;
use crate::normalize::{merge_attribute_sets, AliasTable};
use crate::report::SavedPage;

use super::{evaluate, EvalError, GroundTruth, MetricsReport};

/// Text-only, image-only and merged scores for one saved report.
#[derive(Debug, Clone, PartialEq)]
pub struct DocumentScores {
    pub text: MetricsReport,
    /// Images are pooled per page; pages without images are left out.
    /// `None` when no page had an image.
    pub image: Option<MetricsReport>,
    pub merged: MetricsReport,
}

fn canonical(sets: &[AttributeSet], aliases: &AliasTable) -> Result<AttributeSet, EvalError> {
    merge_attribute_sets(sets, aliases, Vec::new())
        .map(|m| m.attributes)
        .map_err(|e| EvalError::Parse(e.to_string()))
}

pub fn score_document(pages: &[SavedPage], gt: &GroundTruth, aliases: &AliasTable) -> Result<DocumentScores, EvalError> {
    let mut text = Vec::with_capacity(pages.len());
    let mut image = Vec::new();
    let mut merged = Vec::with_capacity(pages.len());
    for p in pages {
        text.push(canonical(std::slice::from_ref(&p.text), aliases)?);
        if !p.images.is_empty() {
            image.push(canonical(&p.images, aliases)?);
        }
        merged.push(canonical(std::slice::from_ref(&p.merged), aliases)?);
    }
    Ok(DocumentScores {
        text: evaluate(&text, gt)?,
        image: if image.is_empty() { None } else { Some(evaluate(&image, gt)?) },
        merged: evaluate(&merged, gt)?,
    })
}
