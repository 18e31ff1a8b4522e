use std::collections::HashMap;
use std::path::Path;

use super::NormalizeError;

/// Lookup form of a value: lowercased, with '-', '_' and '.' removed and
/// whitespace collapsed.
pub fn lookup_key(value: &str) -> String {
    let stripped: String = value
        .to_lowercase()
        .chars()
        .filter(|c| !matches!(c, '-' | '_' | '.'))
        .collect();
    stripped.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Upper-cases the first letter of every word (words start after whitespace,
/// '-', '/' or '(') and lower-cases the rest.
pub fn title_case(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    let mut at_start = true;
    for c in value.chars() {
        if at_start {
            out.extend(c.to_uppercase());
        } else {
            out.extend(c.to_lowercase());
        }
        at_start = c.is_whitespace() || matches!(c, '-' | '/' | '(');
    }
    out
}

const DEFAULT_RULES: &[(&str, &str)] = &[
    ("vneck", "V-Neck"),
    ("v neck", "V-Neck"),
    ("v-neck", "V-Neck"),
    ("crewneck", "Crew Neck"),
    ("crew neck", "Crew Neck"),
    ("longsleeve", "Long Sleeve"),
    ("long sleeve", "Long Sleeve"),
];

/// Maps surface variants of a value to one display form.
///
/// Canonical forms are always registered as their own variant, so they are
/// fixed points of [`canonicalize_value`]. Rules that would break that are
/// rejected when added.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AliasTable {
    rules: HashMap<String, String>,
}

impl AliasTable {
    /// No rules at all: canonicalization is title-casing only.
    pub fn empty() -> Self {
        AliasTable::default()
    }

    /// The built-in neckline and sleeve variants.
    pub fn builtin() -> Self {
        let mut t = AliasTable::empty();
        for (i, (variant, canonical)) in DEFAULT_RULES.iter().enumerate() {
            t.add_rule(variant, canonical, i + 1).expect("builtin alias rules are consistent");
        }
        t
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn get(&self, value: &str) -> Option<&str> {
        self.rules.get(&lookup_key(value)).map(String::as_str)
    }

    /// Adds `variant => canonical`. `line` is only used in error messages.
    pub fn add_rule(&mut self, variant: &str, canonical: &str, line: usize) -> Result<(), NormalizeError> {
        let canonical = canonical.split_whitespace().collect::<Vec<_>>().join(" ");
        if canonical.is_empty() || lookup_key(variant).is_empty() {
            return Err(NormalizeError::AliasConflict {
                line,
                message: "empty variant or canonical form".into(),
            });
        }
        for k in [lookup_key(&canonical), lookup_key(variant)] {
            match self.rules.get(&k) {
                Some(existing) if *existing != canonical => {
                    return Err(NormalizeError::AliasConflict {
                        line,
                        message: format!("{k:?} already maps to {existing:?}, not {canonical:?}"),
                    })
                }
                _ => {}
            }
        }
        self.rules.insert(lookup_key(&canonical), canonical.clone());
        self.rules.insert(lookup_key(variant), canonical);
        Ok(())
    }

    /// Parses `variant => Canonical Form` lines; blank lines and lines
    /// starting with '#' are skipped.
    pub fn parse_rules(&mut self, src: &str) -> Result<(), NormalizeError> {
        for (i, raw) in src.lines().enumerate() {
            let l = raw.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            let Some((variant, canonical)) = l.split_once("=>") else {
                return Err(NormalizeError::AliasConflict {
                    line: i + 1,
                    message: format!("expected `variant => Canonical`, got {l:?}"),
                });
            };
            self.add_rule(variant.trim(), canonical.trim(), i + 1)?;
        }
        Ok(())
    }

    /// Built-in rules extended with the rules in `path`.
    pub fn load(path: &Path) -> Result<Self, NormalizeError> {
        let src = std::fs::read_to_string(path).map_err(|source| NormalizeError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut t = AliasTable::builtin();
        t.parse_rules(&src)?;
        Ok(t)
    }
}

pub fn canonicalize_value(raw: &str, aliases: &AliasTable) -> Result<String, NormalizeError> {
    let norm = raw.split_whitespace().collect::<Vec<_>>().join(" ");
    if norm.is_empty() {
        return Err(NormalizeError::EmptyValue);
    }
    Ok(match aliases.get(&norm) {
        Some(c) => c.to_string(),
        None => title_case(&norm),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canon(s: &str) -> String {
        canonicalize_value(s, &AliasTable::builtin()).unwrap()
    }

    #[test]
    fn vneck_variants() {
        for v in ["vneck", "V-Neck", "v neck", "V.NECK", "  v   neck "] {
            assert_eq!(canon(v), "V-Neck", "{v}");
        }
        assert_eq!(canon("crewneck"), "Crew Neck");
        assert_eq!(canon("LongSleeve"), "Long Sleeve");
    }

    #[test]
    fn title_case_fallback() {
        assert_eq!(canon("earthy greens and grey tones"), "Earthy Greens And Grey Tones");
        assert_eq!(canon("sustainable brushed super-kid mohair yarn"), "Sustainable Brushed Super-Kid Mohair Yarn");
        assert_eq!(canon("women's fashion"), "Women's Fashion");
        assert_eq!(canon("Deep V-Neckline"), "Deep V-Neckline");
    }

    #[test]
    fn empty_value() {
        assert!(matches!(
            canonicalize_value("  ", &AliasTable::builtin()),
            Err(NormalizeError::EmptyValue)
        ));
    }

    #[test]
    fn rule_file() {
        let mut t = AliasTable::builtin();
        t.parse_rules("# fabric\nbrushed mohair => Mohair\n\nmohair yarn => Mohair\n").unwrap();
        assert_eq!(canonicalize_value("BRUSHED   mohair", &t).unwrap(), "Mohair");
        assert_eq!(canonicalize_value("mohair", &t).unwrap(), "Mohair");
        assert!(t.parse_rules("mohair => Wool").is_err());
        assert!(t.parse_rules("no arrow here").is_err());
    }

    #[test]
    fn canonical_forms_are_fixed_points() {
        let t = AliasTable::builtin();
        for (_, c) in DEFAULT_RULES {
            assert_eq!(canonicalize_value(c, &t).unwrap(), *c);
        }
    }
}
