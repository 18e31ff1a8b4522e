use crate::attributes::{AttributeKey, AttributeSet, SetSource, NOT_MENTIONED};
use crate::warning::{Warning, WarningKind};

/// Which call a response answers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResponseOrigin {
    Text,
    /// Hex sha-256 of the image that was sent.
    Image(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedAttributes {
    pub set: AttributeSet,
    pub warnings: Vec<Warning>,
}

const WRAPPERS: &[char] = &['*', '_', '"', '\'', '`', '{', '}', '[', ']', '(', ')'];

fn strip_list_marker(line: &str) -> &str {
    let mut s = line.trim_start();
    loop {
        let before = s;
        for p in ["- ", "* ", "• ", "+ ", "{", "\"", "'", "**", "__"] {
            if let Some(rest) = s.strip_prefix(p) {
                s = rest.trim_start();
            }
        }
        // "1." / "2)" numbering
        let digits = s.chars().take_while(char::is_ascii_digit).count();
        if digits > 0 {
            let rest = &s[digits..];
            if let Some(r) = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')')) {
                if r.starts_with(char::is_whitespace) {
                    s = r.trim_start();
                }
            }
        }
        if s == before {
            return s;
        }
    }
}

fn clean_value(v: &str) -> &str {
    v.trim()
        .trim_matches(|c: char| WRAPPERS.contains(&c) || c.is_whitespace())
        .trim_end_matches(['.', ';'])
        .trim()
}

fn split_values(rhs: &str) -> impl Iterator<Item = &str> {
    let rhs = rhs.trim().trim_end_matches([',', ';']);
    rhs.split(',').map(clean_value).filter(|v| !v.is_empty())
}

fn parse_json(raw: &str, set: &mut AttributeSet, warnings: &mut Vec<Warning>, page: usize) -> bool {
    let Ok(serde_json::Value::Object(map)) = serde_json::from_str::<serde_json::Value>(raw.trim()) else {
        return false;
    };
    for (k, v) in map {
        let Some(key) = AttributeKey::lookup(&k) else {
            warnings.push(Warning::new(
                WarningKind::ParseWarning,
                Some(page),
                format!("ignoring unknown attribute {k:?}"),
            ));
            continue;
        };
        let items: Vec<String> = match v {
            serde_json::Value::Array(a) => a
                .into_iter()
                .map(|x| match x {
                    serde_json::Value::String(s) => s,
                    other => other.to_string(),
                })
                .collect(),
            serde_json::Value::String(s) => split_values(&s).map(str::to_string).collect(),
            serde_json::Value::Null => Vec::new(),
            other => vec![other.to_string()],
        };
        for item in items {
            set.push(key, clean_value(&item));
        }
    }
    true
}

/// Parses an LLM answer into an attribute set.
///
/// Accepts `Key: v1, v2` lines with arbitrary list and emphasis markup around
/// them, keys on their own line followed by bulleted values, and plain JSON
/// objects. Never fails: anything unrecognisable leaves the affected keys at
/// "Not Mentioned" and is reported as a warning.
pub fn parse_attribute_response(raw: &str, page_index: usize, origin: ResponseOrigin) -> ParsedAttributes {
    let mut set = match origin {
        ResponseOrigin::Text => AttributeSet::empty(SetSource::Text, page_index),
        ResponseOrigin::Image(hash) => AttributeSet::for_image(page_index, hash),
    };
    let mut warnings = Vec::new();
    if raw.trim().is_empty() {
        return ParsedAttributes { set, warnings };
    }
    if parse_json(raw, &mut set, &mut warnings, page_index) {
        return ParsedAttributes { set, warnings };
    }

    let mut recognised = 0usize;
    // Key whose values continue on following lines.
    let mut open: Option<AttributeKey> = None;
    for line in raw.lines() {
        let body = strip_list_marker(line);
        if body.trim_matches(|c: char| WRAPPERS.contains(&c) || c.is_whitespace() || c == ',').is_empty() {
            continue;
        }
        match body.split_once(':') {
            Some((lhs, rhs)) => {
                let name = lhs.trim_matches(|c: char| WRAPPERS.contains(&c) || c.is_whitespace());
                match AttributeKey::lookup(name) {
                    Some(key) => {
                        recognised += 1;
                        let mut any = false;
                        for v in split_values(rhs) {
                            set.push(key, v);
                            any = true;
                        }
                        open = (!any).then_some(key);
                    }
                    None => {
                        open = None;
                        if !clean_value(rhs).is_empty() {
                            warnings.push(Warning::new(
                                WarningKind::ParseWarning,
                                Some(page_index),
                                format!("ignoring unknown attribute {name:?}"),
                            ));
                        }
                    }
                }
            }
            None => {
                if let Some(key) = open {
                    for v in split_values(body) {
                        set.push(key, v);
                    }
                }
            }
        }
    }
    if recognised == 0 {
        warnings.push(Warning::new(
            WarningKind::ParseWarning,
            Some(page_index),
            "response contains no recognisable attribute lines",
        ));
    }
    ParsedAttributes { set, warnings }
}

/// Renders a set as `Key: v1, v2` lines in canonical key order.
pub fn format_attribute_set(set: &AttributeSet) -> String {
    let mut out = String::new();
    for (key, values) in set.iter() {
        out.push_str(key.display_name());
        out.push_str(": ");
        if values.is_empty() {
            out.push_str(NOT_MENTIONED);
        } else {
            out.push_str(&values.join(", "));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use AttributeKey::*;

    fn parse(raw: &str) -> ParsedAttributes {
        parse_attribute_response(raw, 0, ResponseOrigin::Text)
    }

    #[test]
    fn slouchy_box() {
        let raw = "{Color: Earthy Greens And Grey Tones\n Sleeve Style: Raglan Sleeves\n Product Type: V-Neck Sweater\n Material: Sustainable Brushed Super-Kid Mohair Yarn\n Features: Cosy, Soft Finish\n Categories: Casual, Knitwear\n Age: Youthful\n Neck: Deep V-Neckline}";
        let p = parse(raw);
        assert!(p.warnings.is_empty());
        assert_eq!(p.set.get(Color), ["Earthy Greens And Grey Tones"]);
        assert_eq!(p.set.get(Features), ["Cosy", "Soft Finish"]);
        assert_eq!(p.set.get(Categories), ["Casual", "Knitwear"]);
        assert_eq!(p.set.get(Neck), ["Deep V-Neckline"]);
    }

    #[test]
    fn image_box_with_trailing_comma() {
        let raw = "{Color: Multicolor,\n Sleeve Style: Long Sleeve\n Categories: Women's Fashion\n Neck: V-Neck}";
        let p = parse_attribute_response(raw, 2, ResponseOrigin::Image("ab".into()));
        assert_eq!(p.set.get(Color), ["Multicolor"]);
        assert_eq!(p.set.get(Categories), ["Women's Fashion"]);
        assert_eq!(p.set.image_hash.as_deref(), Some("ab"));
        assert_eq!(p.set.page_index, 2);
        assert!(p.set.is_not_mentioned(Material));
        assert!(p.set.check_invariants());
    }

    #[test]
    fn empty_is_all_sentinel() {
        let p = parse("");
        assert!(p.set.is_all_sentinel());
        assert!(p.warnings.is_empty());
    }

    #[test]
    fn garbage_warns() {
        let p = parse("I'm sorry, I cannot help with that.");
        assert!(p.set.is_all_sentinel());
        assert_eq!(p.warnings.len(), 1);
        assert_eq!(p.warnings[0].kind, WarningKind::ParseWarning);
    }

    #[test]
    fn markdown_and_synonyms() {
        let raw = "Here are the attributes:\n\n1. **Color**: Red, Blue.\n- *Age Group*: Adult\n* Neck Style: N/A\n- Size: XL\n";
        let p = parse(raw);
        assert_eq!(p.set.get(Color), ["Red", "Blue"]);
        assert_eq!(p.set.get(Age), ["Adult"]);
        assert!(p.set.is_not_mentioned(Neck));
        assert_eq!(p.warnings.len(), 1, "{:?}", p.warnings);
    }

    #[test]
    fn values_on_following_lines() {
        let p = parse("Features:\n- V-Neck\n- Drop Shoulder\nAge: Adult");
        assert_eq!(p.set.get(Features), ["V-Neck", "Drop Shoulder"]);
        assert_eq!(p.set.get(Age), ["Adult"]);
    }

    #[test]
    fn json_object() {
        let p = parse(r#"{"Color": ["Red", "Navy"], "Neck": "V-Neck", "Material": "Not Mentioned"}"#);
        assert_eq!(p.set.get(Color), ["Red", "Navy"]);
        assert_eq!(p.set.get(Neck), ["V-Neck"]);
        assert!(p.set.is_not_mentioned(Material));
    }

    #[test]
    fn format_round_trip() {
        let mut s = AttributeSet::empty(SetSource::Text, 0);
        s.set_values(Color, ["Red", "Blue"]);
        s.set_values(Neck, ["V-Neck"]);
        let text = format_attribute_set(&s);
        assert_eq!(parse(&text).set, s);
    }
}
