use std::collections::BTreeMap;
use std::path::Path;

use serde_json::Value;

use super::EvalError;
use crate::attributes::{is_sentinel, AttributeKey, AttributeSet, SetSource};
use crate::normalize::{canonicalize_value, AliasTable};

/// Annotated attribute values per page. Keys missing from a page's entry are
/// "Not Mentioned".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruth {
    pub pages: BTreeMap<usize, AttributeSet>,
}

impl GroundTruth {
    /// Parses `{"<page>": {"<Attribute>": ["v", ..] | "Not Mentioned"}}`.
    /// Values are canonicalized with `aliases`.
    pub fn from_json(src: &str, aliases: &AliasTable) -> Result<Self, EvalError> {
        let root: BTreeMap<String, BTreeMap<String, Value>> =
            serde_json::from_str(src).map_err(|e| EvalError::Parse(e.to_string()))?;
        let mut pages = BTreeMap::new();
        for (page, attrs) in root {
            let index: usize = page
                .trim()
                .parse()
                .map_err(|_| EvalError::Parse(format!("page key {page:?} is not an index")))?;
            let mut set = AttributeSet::empty(SetSource::Merged, index);
            for (name, value) in attrs {
                let key = AttributeKey::lookup(&name)
                    .ok_or_else(|| EvalError::Parse(format!("page {index}: unknown attribute {name:?}")))?;
                let raw: Vec<String> = match value {
                    Value::String(s) => vec![s],
                    Value::Array(items) => items
                        .into_iter()
                        .map(|v| match v {
                            Value::String(s) => Ok(s),
                            other => Err(EvalError::Parse(format!("page {index} {name}: expected string, got {other}"))),
                        })
                        .collect::<Result<_, _>>()?,
                    Value::Null => vec![],
                    other => return Err(EvalError::Parse(format!("page {index} {name}: unexpected {other}"))),
                };
                let real: Vec<&String> = raw.iter().filter(|v| !is_sentinel(v.trim()) && !v.trim().is_empty()).collect();
                if !real.is_empty() && real.len() != raw.len() {
                    return Err(EvalError::Parse(format!(
                        "page {index} {name}: \"Not Mentioned\" mixed with real values"
                    )));
                }
                let values = real
                    .into_iter()
                    .map(|v| canonicalize_value(v, aliases).map_err(|e| EvalError::Parse(e.to_string())))
                    .collect::<Result<Vec<_>, _>>()?;
                set.set_values(key, values);
            }
            pages.insert(index, set);
        }
        Ok(GroundTruth { pages })
    }

    pub fn load(path: &Path, aliases: &AliasTable) -> Result<Self, EvalError> {
        let src = std::fs::read_to_string(path).map_err(|source| EvalError::Io {
            path: path.display().to_string(),
            source,
        })?;
        GroundTruth::from_json(&src, aliases)
    }

    pub fn page(&self, index: usize) -> Option<&AttributeSet> {
        self.pages.get(&index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_canonicalize() {
        let gt = GroundTruth::from_json(
            r#"{"0": {"Neck Style": ["vneck"], "Color": "Not Mentioned", "Age Group": ["adult"]}, "2": {}}"#,
            &AliasTable::builtin(),
        )
        .unwrap();
        let p0 = gt.page(0).unwrap();
        assert_eq!(p0.get(AttributeKey::Neck), ["V-Neck"]);
        assert_eq!(p0.get(AttributeKey::Age), ["Adult"]);
        assert!(p0.is_not_mentioned(AttributeKey::Color));
        assert!(p0.is_not_mentioned(AttributeKey::Material));
        assert!(gt.page(2).unwrap().is_all_sentinel());
        assert!(gt.page(1).is_none());
    }

    #[test]
    fn rejects_bad_input() {
        let a = AliasTable::builtin();
        assert!(GroundTruth::from_json(r#"{"x": {}}"#, &a).is_err());
        assert!(GroundTruth::from_json(r#"{"0": {"Size": ["XL"]}}"#, &a).is_err());
        assert!(GroundTruth::from_json(r#"{"0": {"Neck": ["V-Neck", "Not Mentioned"]}}"#, &a).is_err());
        assert!(GroundTruth::from_json(r#"{"0": {"Neck": [3]}}"#, &a).is_err());
    }
}
