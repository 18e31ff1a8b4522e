use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use serde::Serialize;

use super::{cosine_similarity, CatalogEntry, EmbeddingProvider, EmbeddingVector, MatchError};
use crate::attributes::AttributeKey;
use crate::exec::{self, Execution};
use crate::normalize::MergedPageAttributes;

pub const DEFAULT_THRESHOLD: f64 = 0.85;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchResult {
    pub predicted_value: String,
    pub attribute: AttributeKey,
    pub best_catalog_value: Option<String>,
    /// 0 when the catalog has nothing for the attribute.
    pub similarity: f64,
    pub matched: bool,
}

/// Holds the provider, threshold and a per-run embedding cache shared by
/// every page and document matched through it.
pub struct Matcher<'a> {
    provider: &'a dyn EmbeddingProvider,
    threshold: f64,
    exec: Execution,
    cache: RwLock<HashMap<String, Arc<EmbeddingVector>>>,
}

impl<'a> Matcher<'a> {
    pub fn new(provider: &'a dyn EmbeddingProvider, threshold: f64) -> Result<Self, MatchError> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(MatchError::InvalidThreshold(threshold));
        }
        Ok(Matcher {
            provider,
            threshold,
            exec: Execution::Sequential,
            cache: RwLock::new(HashMap::new()),
        })
    }

    pub fn exec(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn cached(&self) -> usize {
        self.cache.read().map_or(0, |c| c.len())
    }

    fn embedding(&self, text: &str) -> Result<Arc<EmbeddingVector>, MatchError> {
        if let Some(v) = self.cache.read().ok().and_then(|c| c.get(text).cloned()) {
            return Ok(v);
        }
        let v = Arc::new(self.provider.embed(text).map_err(|e| MatchError::Provider {
            value: text.to_string(),
            source: Box::new(e),
        })?);
        if let Ok(mut c) = self.cache.write() {
            c.entry(text.to_string()).or_insert_with(|| v.clone());
        }
        Ok(v)
    }

    /// Results follow key order, then predicted value order.
    pub fn match_page(&self, pred: &MergedPageAttributes, catalog: &[CatalogEntry]) -> Result<Vec<MatchResult>, MatchError> {
        let mut by_key: HashMap<AttributeKey, Vec<&str>> = HashMap::new();
        for e in catalog {
            by_key.entry(e.attribute).or_default().push(&e.value);
        }

        // Warm the cache for every string this page needs, concurrently.
        let mut wanted: Vec<&str> = Vec::new();
        for key in AttributeKey::ALL {
            let values = pred.attributes.values(key);
            if values.is_empty() {
                continue;
            }
            wanted.extend(values.iter().map(String::as_str));
            wanted.extend(by_key.get(&key).into_iter().flatten());
        }
        wanted.sort_unstable();
        wanted.dedup();
        wanted.retain(|w| self.cache.read().map_or(true, |c| !c.contains_key(*w)));
        for r in exec::map(self.exec, &wanted, |_, w| self.embedding(w)) {
            r?;
        }

        let mut out = Vec::new();
        for key in AttributeKey::ALL {
            let candidates = by_key.get(&key).map_or(&[][..], Vec::as_slice);
            for value in pred.attributes.values(key) {
                let p = self.embedding(value)?;
                let mut best: Option<(&str, f64)> = None;
                for &c in candidates {
                    let s = cosine_similarity(&p, &*self.embedding(c)?)?;
                    if best.is_none_or(|(_, b)| s > b) {
                        best = Some((c, s));
                    }
                }
                out.push(match best {
                    Some((c, s)) => MatchResult {
                        predicted_value: value.clone(),
                        attribute: key,
                        best_catalog_value: Some(c.to_string()),
                        similarity: s,
                        matched: s >= self.threshold,
                    },
                    None => MatchResult {
                        predicted_value: value.clone(),
                        attribute: key,
                        best_catalog_value: None,
                        similarity: 0.0,
                        matched: false,
                    },
                });
            }
        }
        Ok(out)
    }
}

/// One-shot matching with a fresh cache.
pub fn match_attributes(
    pred: &MergedPageAttributes,
    catalog: &[CatalogEntry],
    provider: &dyn EmbeddingProvider,
    threshold: f64,
) -> Result<Vec<MatchResult>, MatchError> {
    Matcher::new(provider, threshold)?.match_page(pred, catalog)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attributes::{AttributeSet, SetSource};
    use crate::matching::MockTrigramProvider;
    use crate::normalize::{merge_attribute_sets, AliasTable};
    use AttributeKey::*;

    fn page(values: &[(AttributeKey, &[&str])]) -> MergedPageAttributes {
        let mut s = AttributeSet::empty(SetSource::Text, 0);
        for (k, v) in values {
            s.set_values(*k, v.iter());
        }
        merge_attribute_sets(&[s], &AliasTable::empty(), vec![]).unwrap()
    }

    fn entry(attribute: AttributeKey, value: &str) -> CatalogEntry {
        CatalogEntry {
            attribute,
            value: value.into(),
            category: None,
        }
    }

    #[test]
    fn identical_string_matches() {
        let p = MockTrigramProvider::default();
        let r = match_attributes(
            &page(&[(Neck, &["V-Neck"])]),
            &[entry(Neck, "V-Neck"), entry(Neck, "Crew Neck")],
            &p,
            1.0,
        )
        .unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].best_catalog_value.as_deref(), Some("V-Neck"));
        assert!((r[0].similarity - 1.0).abs() < 1e-12);
        assert!(r[0].matched);
    }

    #[test]
    fn empty_lane_is_unmatched() {
        let p = MockTrigramProvider::default();
        let r = match_attributes(&page(&[(Color, &["Multicolor"])]), &[entry(Neck, "V-Neck")], &p, 0.5).unwrap();
        assert_eq!(r[0].best_catalog_value, None);
        assert!(!r[0].matched);
    }

    #[test]
    fn sentinels_produce_nothing() {
        let p = MockTrigramProvider::default();
        let r = match_attributes(&page(&[]), &[entry(Neck, "V-Neck")], &p, 0.5).unwrap();
        assert!(r.is_empty());
    }

    #[test]
    fn threshold_bounds() {
        let p = MockTrigramProvider::default();
        assert!(matches!(Matcher::new(&p, 1.2), Err(MatchError::InvalidThreshold(_))));
    }

    #[test]
    fn cache_is_reused() {
        let p = MockTrigramProvider::default();
        let m = Matcher::new(&p, 0.85).unwrap().exec(Execution::Parallel(3));
        let cat = [entry(Neck, "V-Neck"), entry(Neck, "Crew Neck")];
        m.match_page(&page(&[(Neck, &["V Neck"])]), &cat).unwrap();
        assert_eq!(m.cached(), 3);
        m.match_page(&page(&[(Neck, &["V Neck", "Crew Neck"])]), &cat).unwrap();
        assert_eq!(m.cached(), 3);
    }
}
