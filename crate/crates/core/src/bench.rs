//! Runtime scaling harness over synthetic reports, with in-memory mock
//! backends so nothing but local work is measured.

use std::path::PathBuf;
use std::time::Instant;

use serde::Serialize;

use crate::attributes::AttributeKey;
use crate::config::{EmbeddingChoice, LlmChoice, OutputFormat, PipelineConfig};
use crate::exec::Execution;
use crate::extract::{Backoff, MockLlm, ModelParams, PromptTemplate, Templates};
use crate::ingest::CleanPolicy;
use crate::matching::{CatalogEntry, MockTrigramProvider, DEFAULT_THRESHOLD};
use crate::normalize::{AliasTable, BoilerplateRules};
use crate::pipeline::{run_with, PipelineError, Runtime};
use crate::synth::{generate_synthetic_document, SynthError, SynthSpec};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("document failed: {0}")]
    Failed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchRow {
    pub pages: usize,
    /// Median wall-clock seconds of `run_with` over the repeats.
    pub seconds: f64,
}

const LEXICON: &[(AttributeKey, &str, &[&str])] = &[
    (AttributeKey::Color, "Grey", &["grey"]),
    (AttributeKey::Color, "Navy", &["navy"]),
    (AttributeKey::SleeveStyle, "Raglan", &["raglan"]),
    (AttributeKey::ProductType, "Cardigan", &["cardigan"]),
    (AttributeKey::ProductType, "Blazer", &["blazer"]),
    (AttributeKey::Material, "Cotton", &["cotton"]),
    (AttributeKey::Material, "Mohair", &["mohair"]),
    (AttributeKey::Features, "Pockets", &["pockets"]),
    (AttributeKey::Categories, "Womenswear", &["womenswear"]),
    (AttributeKey::Age, "Youthful", &["youthful"]),
    (AttributeKey::Neck, "V-Neck", &["v-neck"]),
];

/// Mock backends and catalog matching the synthetic vocabulary.
pub fn bench_runtime() -> Runtime {
    let mut llm = MockLlm::new();
    let mut catalog = Vec::new();
    for &(key, value, triggers) in LEXICON {
        llm = llm.with_text(key, value, triggers);
        catalog.push(CatalogEntry {
            attribute: key,
            value: value.to_string(),
            category: None,
        });
    }
    Runtime {
        llm: Box::new(llm),
        embedder: Box::new(MockTrigramProvider::default()),
        ocr: None,
        corrector: None,
        aliases: AliasTable::builtin(),
        boilerplate: BoilerplateRules::default(),
        catalog: Some(catalog),
        templates: Templates::default(),
        params: ModelParams::default(),
        backoff: Backoff::NONE,
    }
}

/// Settings for timing `input` with the bench runtime.
pub fn bench_config(input: PathBuf, exec: Execution) -> PipelineConfig {
    PipelineConfig {
        inputs: vec![input],
        // The runtime is built in memory; the path is never read.
        llm: LlmChoice::Mock {
            lexicon: PathBuf::from("<builtin>"),
        },
        prompt_id: PromptTemplate::default_text().id().to_string(),
        temperature: crate::extract::DEFAULT_TEMPERATURE,
        max_retries: 0,
        embedding: EmbeddingChoice::Mock { dim: 256 },
        clean: CleanPolicy::default(),
        aliases: None,
        boilerplate_patterns: Vec::new(),
        catalog: None,
        threshold: DEFAULT_THRESHOLD,
        concurrency: exec.limit(),
        no_images: false,
        ocr_command: None,
        dpi: crate::ingest::DEFAULT_DPI,
        corrections: None,
        output_dir: None,
        format: OutputFormat::Json,
        timings: true,
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

/// Times one pipeline run per page count (median of `repeats`, at least 1).
/// Generation happens before the clock starts.
pub fn bench(
    page_counts: &[usize],
    template: &SynthSpec,
    exec: Execution,
    repeats: usize,
) -> Result<Vec<BenchRow>, BenchError> {
    let rt = bench_runtime();
    let dir = std::env::temp_dir().join(format!("pae-bench-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let result = (|| {
        let mut rows = Vec::with_capacity(page_counts.len());
        for &pages in page_counts {
            let spec = SynthSpec {
                pages,
                ..template.clone()
            };
            let path = dir.join(format!("synthetic-{pages}.pdf"));
            generate_synthetic_document(&spec, &path)?;
            let cfg = bench_config(path, exec);
            let mut samples = Vec::with_capacity(repeats.max(1));
            for _ in 0..repeats.max(1) {
                let t = Instant::now();
                let report = run_with(&cfg, &rt)?;
                samples.push(t.elapsed().as_secs_f64());
                if let Some(f) = report.failures.first() {
                    return Err(BenchError::Failed(f.error.clone()));
                }
            }
            rows.push(BenchRow {
                pages,
                seconds: median(samples),
            });
        }
        Ok(rows)
    })();
    let _ = std::fs::remove_dir_all(&dir);
    result
}

/// Per-step growth normalised to a doubling: for consecutive rows
/// `(t2/t1)^(1/log2(n2/n1))`. A linear workload gives about 2.
pub fn doubling_ratios(rows: &[BenchRow]) -> Vec<f64> {
    rows.windows(2)
        .map(|w| {
            let steps = (w[1].pages as f64 / w[0].pages as f64).log2();
            (w[1].seconds / w[0].seconds).powf(1.0 / steps)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_table() {
        assert!(bench(&[], &SynthSpec::default(), Execution::Sequential, 1).unwrap().is_empty());
    }

    #[test]
    fn ratio_normalisation() {
        let rows = [
            BenchRow { pages: 10, seconds: 1.0 },
            BenchRow { pages: 40, seconds: 4.0 },
        ];
        let r = doubling_ratios(&rows);
        assert!((r[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn small_run_has_positive_times() {
        let spec = SynthSpec {
            words_per_page: (50, 80),
            images_per_page: (1, 2),
            ..SynthSpec::default()
        };
        let rows = bench(&[2, 3], &spec, Execution::Sequential, 1).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.seconds > 0.0));
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
