//! The fixed attribute vocabulary and the per-page attribute set shared by
//! every stage of the pipeline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Placeholder value for an attribute with no evidence on a page.
pub const NOT_MENTIONED: &str = "Not Mentioned";

/// One of the eight product attributes the pipeline extracts.
///
/// The declaration order is the canonical order used in prompts, reports and
/// match results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AttributeKey {
    Color,
    SleeveStyle,
    ProductType,
    Material,
    Features,
    Categories,
    Age,
    Neck,
}

impl AttributeKey {
    pub const ALL: [AttributeKey; 8] = [
        AttributeKey::Color,
        AttributeKey::SleeveStyle,
        AttributeKey::ProductType,
        AttributeKey::Material,
        AttributeKey::Features,
        AttributeKey::Categories,
        AttributeKey::Age,
        AttributeKey::Neck,
    ];

    /// Human-facing name, as used in LLM responses and report files.
    pub fn display_name(self) -> &'static str {
        match self {
            AttributeKey::Color => "Color",
            AttributeKey::SleeveStyle => "Sleeve Style",
            AttributeKey::ProductType => "Product Type",
            AttributeKey::Material => "Material",
            AttributeKey::Features => "Features",
            AttributeKey::Categories => "Categories",
            AttributeKey::Age => "Age",
            AttributeKey::Neck => "Neck",
        }
    }

    /// Resolves a key name case-insensitively, accepting the alternate
    /// spellings seen in annotation sheets ("Age Group", "Neck Style",
    /// "Product Categories").
    pub fn lookup(name: &str) -> Option<AttributeKey> {
        let folded: String = name
            .chars()
            .filter(|c| c.is_alphanumeric())
            .flat_map(char::to_lowercase)
            .collect();
        let key = match folded.as_str() {
            "color" | "colour" | "colors" | "colours" => AttributeKey::Color,
            "sleevestyle" | "sleeve" | "sleeves" => AttributeKey::SleeveStyle,
            "producttype" => AttributeKey::ProductType,
            "material" | "materials" => AttributeKey::Material,
            "features" | "feature" | "clothfeatures" => AttributeKey::Features,
            "categories" | "category" | "productcategories" => AttributeKey::Categories,
            "age" | "agegroup" => AttributeKey::Age,
            "neck" | "neckstyle" => AttributeKey::Neck,
            _ => return None,
        };
        Some(key)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for AttributeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown attribute key {0:?}")]
pub struct UnknownAttribute(pub String);

impl FromStr for AttributeKey {
    type Err = UnknownAttribute;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AttributeKey::lookup(s).ok_or_else(|| UnknownAttribute(s.to_string()))
    }
}

/// True for the sentinel and the common spellings an LLM uses for "no value".
pub fn is_sentinel(value: &str) -> bool {
    let v = value.trim().trim_matches(|c: char| c == '.' || c == '"' || c == '\'');
    v.eq_ignore_ascii_case(NOT_MENTIONED)
        || v.eq_ignore_ascii_case("n/a")
        || v.eq_ignore_ascii_case("na")
        || v.eq_ignore_ascii_case("none")
        || v.eq_ignore_ascii_case("not specified")
        || v.eq_ignore_ascii_case("not applicable")
}

/// Where an attribute set came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SetSource {
    Text,
    Image,
    Merged,
}

/// Values for all eight attributes of one page (or one image on a page).
///
/// Every key is always present. A key without evidence holds exactly the
/// sentinel list `["Not Mentioned"]`, and the sentinel never shares a list
/// with real values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeSet {
    entries: [Vec<String>; 8],
    pub source: SetSource,
    pub page_index: usize,
    /// Hex sha-256 of the source image; set iff `source == Image`.
    pub image_hash: Option<String>,
}

impl AttributeSet {
    /// An all-sentinel set.
    pub fn empty(source: SetSource, page_index: usize) -> Self {
        AttributeSet {
            entries: std::array::from_fn(|_| vec![NOT_MENTIONED.to_string()]),
            source,
            page_index,
            image_hash: None,
        }
    }

    pub fn for_image(page_index: usize, image_hash: impl Into<String>) -> Self {
        let mut set = AttributeSet::empty(SetSource::Image, page_index);
        set.image_hash = Some(image_hash.into());
        set
    }

    /// The values for `key`; the sentinel list when nothing was found.
    pub fn get(&self, key: AttributeKey) -> &[String] {
        &self.entries[key.index()]
    }

    /// Real values for `key`, or an empty slice when the key holds the sentinel.
    pub fn values(&self, key: AttributeKey) -> &[String] {
        if self.is_not_mentioned(key) {
            &[]
        } else {
            &self.entries[key.index()]
        }
    }

    pub fn is_not_mentioned(&self, key: AttributeKey) -> bool {
        let e = &self.entries[key.index()];
        e.len() == 1 && e[0] == NOT_MENTIONED
    }

    /// Adds a value, trimming it. Blank and sentinel-like values are ignored;
    /// exact duplicates are kept once. Returns whether the value was added.
    pub fn push(&mut self, key: AttributeKey, value: &str) -> bool {
        let value = value.trim();
        if value.is_empty() || is_sentinel(value) {
            return false;
        }
        let slot = &mut self.entries[key.index()];
        if slot.len() == 1 && slot[0] == NOT_MENTIONED {
            slot.clear();
        }
        if slot.iter().any(|v| v == value) {
            return false;
        }
        slot.push(value.to_string());
        true
    }

    /// Replaces all values of a key. An empty iterator restores the sentinel.
    pub fn set_values<I, S>(&mut self, key: AttributeKey, values: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        self.entries[key.index()] = vec![NOT_MENTIONED.to_string()];
        for v in values {
            self.push(key, v.as_ref());
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (AttributeKey, &[String])> + '_ {
        AttributeKey::ALL.iter().map(move |&k| (k, self.get(k)))
    }

    /// True when every key holds the sentinel.
    pub fn is_all_sentinel(&self) -> bool {
        AttributeKey::ALL.iter().all(|&k| self.is_not_mentioned(k))
    }

    /// Checks the sentinel-exclusivity and non-empty-value invariants.
    pub fn check_invariants(&self) -> bool {
        self.entries.iter().all(|values| {
            !values.is_empty()
                && (values.len() == 1 && values[0] == NOT_MENTIONED
                    || values
                        .iter()
                        .all(|v| !v.trim().is_empty() && v.trim() == v && !is_sentinel(v)))
        }) && (self.image_hash.is_some() == (self.source == SetSource::Image))
    }
}
