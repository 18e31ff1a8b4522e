use pae_core::ingest::{extract_images, extract_text_native, load_document};
use pae_core::synth::{generate_synthetic_document, SynthSpec};

fn spec(pages: usize) -> SynthSpec {
    SynthSpec {
        pages,
        seed: 7,
        ..SynthSpec::default()
    }
}

#[test]
fn extraction_recovers_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.pdf");
    let manifest = generate_synthetic_document(&spec(4), &path).unwrap();
    let doc = load_document(&path).unwrap();
    assert_eq!(doc.page_count(), 4);
    for mp in &manifest.pages {
        let blocks = extract_text_native(&doc, mp.index).unwrap();
        assert!(blocks.warnings.is_empty(), "{:?}", blocks.warnings);
        let text: Vec<String> = blocks
            .items
            .iter()
            .map(|b| b.text.split_whitespace().collect::<Vec<_>>().join(" "))
            .collect();
        assert_eq!(text.join("\n"), mp.text);
        let images = extract_images(&doc, mp.index).unwrap();
        let hashes: Vec<String> = images.items.iter().map(|i| i.content_hash.to_hex()).collect();
        assert_eq!(hashes, mp.image_hashes);
    }
}

#[test]
fn manifest_respects_ranges() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.pdf");
    let m = generate_synthetic_document(&spec(10), &path).unwrap();
    assert_eq!(m.pages.len(), 10);
    for p in &m.pages {
        assert!((500..=1000).contains(&p.word_count), "{}", p.word_count);
        assert!((4..=6).contains(&p.image_hashes.len()));
        assert!(!p.hashtags.is_empty() && p.hashtags.len() <= 2);
    }
    let sidecar = std::fs::read_to_string(pae_core::synth::manifest_path(&path)).unwrap();
    let back: pae_core::synth::Manifest = serde_json::from_str(&sidecar).unwrap();
    assert_eq!(back, m);
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.pdf"), dir.path().join("b.pdf"));
    generate_synthetic_document(&spec(10), &a).unwrap();
    generate_synthetic_document(&spec(10), &b).unwrap();
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

/// Page count read by scanning for `/Type /Page` leaf objects in the raw
/// bytes, independent of the PDF library used by the reader.
#[test]
fn page_count_by_independent_scan() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.pdf");
    generate_synthetic_document(&spec(10), &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    let re = regex::bytes::Regex::new(r"/Type\s*/Page\b").unwrap();
    assert_eq!(re.find_iter(&bytes).count(), 10);
}
