use std::collections::{HashMap, HashSet};

use regex::Regex;

use crate::ingest::TextBlock;

/// What counts as page furniture.
#[derive(Debug, Clone)]
pub struct BoilerplateRules {
    /// Blocks matching any of these (whole block, trimmed) are dropped.
    pub patterns: Vec<Regex>,
    /// Text repeated on at least this fraction of pages, within the same
    /// vertical band, is treated as a running header or footer.
    pub repeat_fraction: f64,
    /// Height in points of the bands used to compare block positions.
    pub band_height: f64,
}

impl Default for BoilerplateRules {
    fn default() -> Self {
        BoilerplateRules {
            patterns: vec![Regex::new(r"(?i)^(page\s*)?\d{1,4}(\s*(/|of)\s*\d{1,4})?$").expect("static pattern")],
            repeat_fraction: 0.5,
            band_height: 36.0,
        }
    }
}

impl BoilerplateRules {
    pub fn with_patterns<I, S>(mut self, extra: I) -> Result<Self, regex::Error>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        for p in extra {
            self.patterns.push(Regex::new(p.as_ref())?);
        }
        Ok(self)
    }
}

type RepeatKey = (String, Option<i64>);

fn repeat_key(b: &TextBlock, band: f64) -> RepeatKey {
    let text = b.text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    (text, b.position.map(|p| (p.top / band).floor() as i64))
}

/// Drops page-number blocks and running headers/footers from the blocks of a
/// document with `page_count` pages. The output is a subsequence of the input.
pub fn filter_boilerplate(blocks: &[TextBlock], page_count: usize, rules: &BoilerplateRules) -> Vec<TextBlock> {
    let band = if rules.band_height > 0.0 { rules.band_height } else { f64::INFINITY };
    let mut pages_with: HashMap<RepeatKey, HashSet<usize>> = HashMap::new();
    for b in blocks {
        pages_with.entry(repeat_key(b, band)).or_default().insert(b.page_index);
    }
    let repeated = |b: &TextBlock| {
        let n = pages_with.get(&repeat_key(b, band)).map_or(0, HashSet::len);
        n >= 2 && n as f64 >= rules.repeat_fraction * page_count as f64
    };
    blocks
        .iter()
        .filter(|b| {
            let t = b.text.trim();
            !(t.is_empty() || rules.patterns.iter().any(|p| p.is_match(t)) || repeated(b))
        })
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{BlockPosition, TextOrigin};

    fn at(text: &str, page: usize, top: f64) -> TextBlock {
        TextBlock {
            text: text.into(),
            page_index: page,
            origin: TextOrigin::Native,
            position: Some(BlockPosition { top, left: 72.0 }),
        }
    }

    #[test]
    fn page_numbers() {
        let r = BoilerplateRules::default();
        let blocks = vec![at("12", 0, 750.0), at("Page 3 of 9", 0, 750.0), at("Body text 12", 0, 100.0)];
        let out = filter_boilerplate(&blocks, 1, &r);
        assert_eq!(out, vec![blocks[2].clone()]);
    }

    #[test]
    fn header_on_five_of_six_pages() {
        let mut blocks = Vec::new();
        for p in 0..6 {
            if p != 3 {
                blocks.push(at("TREND REPORT A/W", p, 20.0));
            }
            blocks.push(at(&format!("unique body {p}"), p, 200.0));
        }
        let out = filter_boilerplate(&blocks, 6, &BoilerplateRules::default());
        assert_eq!(out.len(), 6);
        assert!(out.iter().all(|b| b.text.starts_with("unique")));
    }

    #[test]
    fn same_text_in_different_band_survives() {
        let blocks = vec![at("Knitwear", 0, 20.0), at("Knitwear", 1, 400.0)];
        assert_eq!(filter_boilerplate(&blocks, 2, &BoilerplateRules::default()).len(), 2);
    }

    #[test]
    fn single_page_repeat_is_kept() {
        let blocks = vec![at("Knitwear", 0, 20.0), at("Knitwear", 0, 20.0)];
        assert_eq!(filter_boilerplate(&blocks, 1, &BoilerplateRules::default()).len(), 2);
    }

    #[test]
    fn extra_patterns() {
        let r = BoilerplateRules::default().with_patterns(["(?i)^confidential$"]).unwrap();
        let blocks = vec![at("Confidential", 0, 700.0), at("Body", 0, 100.0)];
        assert_eq!(filter_boilerplate(&blocks, 1, &r).len(), 1);
    }
}
