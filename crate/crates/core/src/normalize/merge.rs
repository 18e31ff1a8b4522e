use std::collections::HashMap;

use super::{canonicalize_value, AliasTable, NormalizeError};
use crate::attributes::{AttributeKey, AttributeSet, SetSource};
use crate::extract::Hashtag;

/// Where a merged value came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Source {
    Text,
    /// Hex sha-256 of the image.
    Image(String),
    /// An already merged set fed back in.
    Merged,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub attribute: AttributeKey,
    pub value: String,
    /// Distinct, in first-contribution order.
    pub sources: Vec<Source>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergedPageAttributes {
    pub page_index: usize,
    pub attributes: AttributeSet,
    pub hashtags: Vec<Hashtag>,
    /// One entry per merged value, in key order then value order.
    pub provenance: Vec<Provenance>,
}

impl MergedPageAttributes {
    pub fn sources(&self, key: AttributeKey, value: &str) -> &[Source] {
        self.provenance
            .iter()
            .find(|p| p.attribute == key && p.value == value)
            .map_or(&[], |p| p.sources.as_slice())
    }
}

fn source_of(set: &AttributeSet) -> Source {
    match set.source {
        SetSource::Text => Source::Text,
        SetSource::Image => Source::Image(set.image_hash.clone().unwrap_or_default()),
        SetSource::Merged => Source::Merged,
    }
}

/// Union of canonicalized values per key, first-seen order. A key stays
/// "Not Mentioned" only when no input has a real value for it.
pub fn merge_attribute_sets(
    sets: &[AttributeSet],
    aliases: &AliasTable,
    hashtags: Vec<Hashtag>,
) -> Result<MergedPageAttributes, NormalizeError> {
    let first = sets.first().ok_or(NormalizeError::NoInput)?;
    let page_index = first.page_index;
    if let Some(other) = sets.iter().find(|s| s.page_index != page_index) {
        return Err(NormalizeError::MixedPages(page_index, other.page_index));
    }
    let mut attributes = AttributeSet::empty(SetSource::Merged, page_index);
    let mut provenance: Vec<Provenance> = Vec::new();
    let mut slot: HashMap<(AttributeKey, String), usize> = HashMap::new();
    for key in AttributeKey::ALL {
        for set in sets {
            for raw in set.values(key) {
                let value = canonicalize_value(raw, aliases)?;
                let src = source_of(set);
                match slot.get(&(key, value.clone())) {
                    Some(&i) => {
                        if !provenance[i].sources.contains(&src) {
                            provenance[i].sources.push(src);
                        }
                    }
                    None => {
                        attributes.push(key, &value);
                        slot.insert((key, value.clone()), provenance.len());
                        provenance.push(Provenance {
                            attribute: key,
                            value,
                            sources: vec![src],
                        });
                    }
                }
            }
        }
    }
    Ok(MergedPageAttributes {
        page_index,
        attributes,
        hashtags,
        provenance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use AttributeKey::*;

    fn text(page: usize) -> AttributeSet {
        AttributeSet::empty(SetSource::Text, page)
    }

    #[test]
    fn neck_union_with_two_sources() {
        let mut t = text(0);
        t.set_values(Neck, ["Deep V-Neckline"]);
        let mut i = AttributeSet::for_image(0, "aa");
        i.set_values(Neck, ["vneck"]);
        let m = merge_attribute_sets(&[t, i], &AliasTable::builtin(), vec![]).unwrap();
        assert_eq!(m.attributes.get(Neck), ["Deep V-Neckline", "V-Neck"]);
        assert_eq!(m.sources(Neck, "Deep V-Neckline"), [Source::Text]);
        assert_eq!(m.sources(Neck, "V-Neck"), [Source::Image("aa".into())]);
        assert_eq!(m.attributes.source, SetSource::Merged);
    }

    #[test]
    fn shared_value_records_both_sources() {
        let mut t = text(0);
        t.set_values(Neck, ["V-Neck"]);
        let mut i = AttributeSet::for_image(0, "bb");
        i.set_values(Neck, ["v neck"]);
        let m = merge_attribute_sets(&[t, i], &AliasTable::builtin(), vec![]).unwrap();
        assert_eq!(m.attributes.get(Neck), ["V-Neck"]);
        assert_eq!(m.sources(Neck, "V-Neck").len(), 2);
    }

    #[test]
    fn sentinel_dropped_when_any_value() {
        let mut i = AttributeSet::for_image(0, "cc");
        i.set_values(Color, ["Multicolor"]);
        let m = merge_attribute_sets(&[text(0), i], &AliasTable::builtin(), vec![]).unwrap();
        assert_eq!(m.attributes.get(Color), ["Multicolor"]);
        assert!(m.attributes.is_not_mentioned(Age));
        assert!(m.attributes.check_invariants());
    }

    #[test]
    fn single_set_is_canonicalized() {
        let mut t = text(3);
        t.set_values(Color, ["earthy greens"]);
        let m = merge_attribute_sets(&[t], &AliasTable::builtin(), vec![]).unwrap();
        assert_eq!(m.attributes.get(Color), ["Earthy Greens"]);
        assert_eq!(m.page_index, 3);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            merge_attribute_sets(&[], &AliasTable::builtin(), vec![]),
            Err(NormalizeError::NoInput)
        ));
        assert!(matches!(
            merge_attribute_sets(&[text(0), text(1)], &AliasTable::builtin(), vec![]),
            Err(NormalizeError::MixedPages(0, 1))
        ));
    }

    #[test]
    fn conflicting_values_are_kept() {
        let mut t = text(0);
        t.set_values(Age, ["Youthful"]);
        let mut i = AttributeSet::for_image(0, "dd");
        i.set_values(Age, ["Adult"]);
        let m = merge_attribute_sets(&[t, i], &AliasTable::builtin(), vec![]).unwrap();
        assert_eq!(m.attributes.get(Age), ["Youthful", "Adult"]);
    }
}
