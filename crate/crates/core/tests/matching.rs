//! Matching checked against an independent reimplementation of the mock
//! trigram embedding.

use pae_core::attributes::{AttributeKey, AttributeSet, SetSource};
use pae_core::matching::{match_attributes, parse_catalog, MockTrigramProvider};
use pae_core::normalize::{merge_attribute_sets, AliasTable};

fn oracle_embed(text: &str, dim: usize) -> Vec<f64> {
    let padded: Vec<char> = format!(" {} ", text.to_lowercase()).chars().collect();
    let mut v = vec![0.0; dim];
    for w in padded.windows(3) {
        let s: String = w.iter().collect();
        let mut h: u64 = 0xcbf29ce484222325;
        for b in s.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        v[(h % dim as u64) as usize] += 1.0;
    }
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

fn oracle_cos(a: &str, b: &str) -> f64 {
    let (x, y) = (oracle_embed(a, 256), oracle_embed(b, 256));
    x.iter().zip(&y).map(|(p, q)| p * q).sum()
}

#[test]
fn v_neck_against_small_catalog() {
    let aliases = AliasTable::empty();
    let catalog = parse_catalog("attribute,value\nNeck,V-Neck\nNeck,Long Sleeve\n", &aliases).unwrap();
    let mut pred = AttributeSet::empty(SetSource::Merged, 0);
    pred.set_values(AttributeKey::Neck, ["V Neck"]);
    let merged = merge_attribute_sets(&[pred], &aliases, Vec::new()).unwrap();
    let provider = MockTrigramProvider::new(256);
    let results = match_attributes(&merged, &catalog, &provider, 0.5).unwrap();
    assert_eq!(results.len(), 1);
    let r = &results[0];
    let want_v = oracle_cos("V Neck", "V-Neck");
    let want_l = oracle_cos("V Neck", "Long Sleeve");
    assert!(want_v > want_l);
    assert_eq!(r.best_catalog_value.as_deref(), Some("V-Neck"));
    assert!((r.similarity - want_v).abs() < 1e-12, "{} vs {want_v}", r.similarity);
    assert_eq!(r.matched, want_v >= 0.5);
}

#[test]
fn threshold_decides_matched_flag() {
    let aliases = AliasTable::empty();
    let catalog = parse_catalog("attribute,value\nColor,Grey\n", &aliases).unwrap();
    let mut pred = AttributeSet::empty(SetSource::Merged, 0);
    pred.set_values(AttributeKey::Color, ["Grey Tones"]);
    let merged = merge_attribute_sets(&[pred], &aliases, Vec::new()).unwrap();
    let provider = MockTrigramProvider::new(256);
    let s = oracle_cos("Grey Tones", "Grey");
    let below = match_attributes(&merged, &catalog, &provider, (s - 0.01).max(0.0)).unwrap();
    let above = match_attributes(&merged, &catalog, &provider, (s + 0.01).min(1.0)).unwrap();
    assert!(below[0].matched);
    assert!(!above[0].matched);
}
