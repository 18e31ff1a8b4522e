use std::path::{Path, PathBuf};

use pae_core::config::{ConfigError, Overrides, PipelineConfig};
use pae_core::pipeline::{run_pipeline, RunReport};
use pae_core::report::{document_json, emit_report, to_pretty};
use pae_core::synth::generate_from_layout;

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/trend_report")
}

fn config(ov: Overrides) -> PipelineConfig {
    PipelineConfig::resolve(Some(&fixture().join("pae.toml")), &ov).unwrap()
}

fn run(ov: Overrides) -> RunReport {
    run_pipeline(&config(ov)).unwrap()
}

#[test]
fn bundled_pdf_is_reproducible_from_its_layout() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("trend_report.pdf");
    generate_from_layout(&fixture().join("layout.toml"), &out).unwrap();
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(fixture().join("trend_report.pdf")).unwrap());
    assert_eq!(
        std::fs::read(dir.path().join("trend_report.manifest.json")).unwrap(),
        std::fs::read(fixture().join("trend_report.manifest.json")).unwrap()
    );
}

#[test]
fn repeated_runs_write_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        run(Overrides {
            output_dir: Some(d.path().to_path_buf()),
            ..Overrides::default()
        });
    }
    for name in ["trend_report.json", "summary.json"] {
        assert_eq!(
            std::fs::read(a.path().join(name)).unwrap(),
            std::fs::read(b.path().join(name)).unwrap()
        );
    }
}

#[test]
fn sequential_and_concurrent_agree() {
    let one = run(Overrides {
        concurrency: Some(1),
        ..Overrides::default()
    });
    let many = run(Overrides {
        concurrency: Some(8),
        ..Overrides::default()
    });
    assert_eq!(
        to_pretty(&document_json(&one.documents[0], false)),
        to_pretty(&document_json(&many.documents[0], false))
    );
}

#[test]
fn boilerplate_and_icons_are_gone_before_extraction() {
    let r = run(Overrides::default());
    let doc = &r.documents[0];
    assert_eq!(doc.pages.len(), 3);
    // Page 0 has a duplicate placement and an icon; one image survives.
    assert_eq!(doc.pages[0].image_attributes.len(), 1);
    assert_eq!(doc.pages[0].hashtags(), ["countrycalling", "Supersizedintarsia"]);
    assert!(doc.pages.windows(2).all(|w| w[0].page < w[1].page));
}

#[test]
fn no_images_keeps_text_results() {
    let full = run(Overrides::default());
    let text_only = run(Overrides {
        no_images: true,
        ..Overrides::default()
    });
    for (f, t) in full.documents[0].pages.iter().zip(&text_only.documents[0].pages) {
        assert!(t.image_attributes.is_empty());
        assert_eq!(f.text_attributes, t.text_attributes);
        assert_eq!(f.merged.hashtags, t.merged.hashtags);
    }
}

#[test]
fn stage_timings_fit_inside_total() {
    let r = run(Overrides::default());
    let t = &r.documents[0].timings_ms;
    let names: Vec<&str> = t.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["extract_content", "extract_attributes", "merge", "match", "total"]);
    let stages: f64 = t[..t.len() - 1].iter().map(|(_, v)| v).sum();
    assert!(stages <= t.last().unwrap().1);
}

#[test]
fn match_stage_is_skipped_without_catalog() {
    let mut cfg = config(Overrides::default());
    cfg.catalog = None;
    let r = run_pipeline(&cfg).unwrap();
    assert!(r.documents[0].pages.iter().all(|p| p.matches.is_empty()));
    assert!(!r.documents[0].timings_ms.iter().any(|(n, _)| n == "match"));
}

#[test]
fn empty_input_directory() {
    let empty = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let r = run(Overrides {
        inputs: vec![empty.path().to_path_buf()],
        output_dir: Some(out.path().to_path_buf()),
        ..Overrides::default()
    });
    assert!(r.documents.is_empty());
    assert_eq!(r.exit_code(), 0);
    let files: Vec<_> = std::fs::read_dir(out.path()).unwrap().flatten().map(|e| e.file_name()).collect();
    assert_eq!(files, ["summary.json"]);
}

#[test]
fn unreadable_document_is_a_partial_failure() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("broken.pdf");
    std::fs::write(&bad, b"not a pdf").unwrap();
    let r = run(Overrides {
        inputs: vec![bad, fixture().join("trend_report.pdf")],
        ..Overrides::default()
    });
    assert_eq!(r.documents.len(), 1);
    assert_eq!(r.failures.len(), 1);
    assert_eq!(r.exit_code(), 1);
}

#[test]
fn missing_catalog_is_a_config_error() {
    let err = PipelineConfig::resolve(
        Some(&fixture().join("pae.toml")),
        &Overrides {
            catalog: Some(PathBuf::from("/nonexistent/catalog.csv")),
            ..Overrides::default()
        },
    )
    .unwrap_err();
    assert!(matches!(err, ConfigError::Invalid(_)));
}

#[test]
fn table_format_is_written() {
    let out = tempfile::tempdir().unwrap();
    let r = run(Overrides::default());
    let files = emit_report(&r, out.path(), pae_core::config::OutputFormat::Table).unwrap();
    let body = std::fs::read_to_string(&files[0]).unwrap();
    assert!(body.contains("V-Neck Sweater"));
    assert!(files.last().unwrap().ends_with("summary.txt"));
}
