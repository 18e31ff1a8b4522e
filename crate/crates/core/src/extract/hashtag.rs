use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Hashtag {
    /// Tag text without the leading '#'.
    pub tag: String,
    pub page_index: usize,
}

fn pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"#(\w+)").expect("static pattern"))
}

/// Every `#word` run in order of appearance, casing preserved, duplicates kept.
pub fn extract_hashtags(text: &str, page_index: usize) -> Vec<Hashtag> {
    pattern()
        .captures_iter(text)
        .map(|c| Hashtag {
            tag: c[1].to_string(),
            page_index,
        })
        .collect()
}
