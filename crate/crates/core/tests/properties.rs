use proptest::prelude::*;

use pae_core::attributes::{AttributeKey, AttributeSet, SetSource};
use pae_core::extract::{extract_hashtags, format_attribute_set, parse_attribute_response, ResponseOrigin};
use pae_core::ingest::{clean_images, CleanPolicy, ExtractedImage, ImageFormat};
use pae_core::normalize::{canonicalize_value, lookup_key, title_case, AliasTable};
use pae_core::png::{self, ColorType};
use pae_core::synth::wrap_lines;

fn key() -> impl Strategy<Value = AttributeKey> {
    (0usize..8).prop_map(|i| AttributeKey::ALL[i])
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn canonicalization_is_idempotent(v in "[ a-zA-Z\\-/]{1,20}") {
        prop_assume!(!v.trim().is_empty());
        let t = AliasTable::builtin();
        let once = canonicalize_value(&v, &t).unwrap();
        prop_assert_eq!(canonicalize_value(&once, &t).unwrap(), once.clone());
        prop_assert_eq!(title_case(&title_case(&v)), title_case(&v));
        prop_assert_eq!(lookup_key(&lookup_key(&v)), lookup_key(&v));
    }

    #[test]
    fn formatted_sets_parse_back(pairs in proptest::collection::vec((key(), "[A-Z][a-z]{0,7}( [A-Z][a-z]{0,7})?"), 0..12)) {
        let mut s = AttributeSet::empty(SetSource::Text, 0);
        for (k, v) in &pairs {
            s.push(*k, v);
        }
        let parsed = parse_attribute_response(&format_attribute_set(&s), 0, ResponseOrigin::Text);
        prop_assert!(parsed.warnings.is_empty());
        prop_assert_eq!(parsed.set, s);
    }

    #[test]
    fn hashtags_are_word_runs(text in "[a-z #_.,]{0,80}") {
        for h in extract_hashtags(&text, 2) {
            prop_assert!(!h.tag.is_empty());
            prop_assert!(h.tag.chars().all(|c| c.is_alphanumeric() || c == '_'));
            let needle = format!("#{}", h.tag);
            prop_assert!(text.contains(&needle));
            prop_assert_eq!(h.page_index, 2);
        }
    }

    #[test]
    fn wrapping_preserves_words(words in proptest::collection::vec("[a-z]{1,12}", 0..40), width in 1usize..60) {
        let text = words.join(" ");
        let lines = wrap_lines(&text, width);
        prop_assert_eq!(lines.join(" "), text);
        for l in &lines {
            prop_assert!(l.len() <= width || !l.contains(' '));
        }
    }

    #[test]
    fn png_round_trip(w in 1u32..24, h in 1u32..24, gray in any::<bool>(), seed in any::<u8>()) {
        let ct = if gray { ColorType::Gray } else { ColorType::Rgb };
        let n = (w * h) as usize * ct.channels();
        let px: Vec<u8> = (0..n).map(|i| (i as u8).wrapping_mul(31).wrapping_add(seed)).collect();
        let file = png::encode(w, h, ct, &px);
        let img = image::load_from_memory(&file).unwrap();
        let raw = if gray { img.to_luma8().into_raw() } else { img.to_rgb8().into_raw() };
        prop_assert_eq!(raw, px);
    }

    #[test]
    fn cleaning_keeps_a_duplicate_free_subset(specs in proptest::collection::vec((0u8..6, 1u32..128, 1u32..128), 0..12)) {
        let images: Vec<ExtractedImage> = specs
            .iter()
            .map(|(b, w, h)| ExtractedImage::new(vec![*b], ImageFormat::Png, *w, *h, 0))
            .collect();
        let policy = CleanPolicy::default();
        let kept = clean_images(images.clone(), &policy);
        let mut seen = std::collections::HashSet::new();
        for k in &kept {
            prop_assert!(k.width >= policy.min_width && k.height >= policy.min_height);
            prop_assert!(seen.insert(k.content_hash));
            prop_assert!(images.contains(k));
        }
    }
}
