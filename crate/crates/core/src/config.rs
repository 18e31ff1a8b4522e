//! Pipeline configuration: a TOML file plus command-line overrides.
//!
//! Relative paths inside the file resolve against the file's directory;
//! relative paths given as overrides resolve against the working directory.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::extract::{PromptTemplate, DEFAULT_TEMPERATURE};
use crate::ingest::{CleanPolicy, DEFAULT_DPI};
use crate::matching::DEFAULT_THRESHOLD;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config {path}: {message}")]
    Syntax { path: String, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Mock,
    Http,
}

impl std::str::FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "mock" => Ok(BackendKind::Mock),
            "http" => Ok(BackendKind::Http),
            other => Err(format!("unknown backend {other:?} (expected mock or http)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Table,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(OutputFormat::Json),
            "table" => Ok(OutputFormat::Table),
            other => Err(format!("unknown format {other:?} (expected json or table)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LlmChoice {
    Mock { lexicon: PathBuf },
    Http { endpoint: String, model: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum EmbeddingChoice {
    Mock { dim: usize },
    Http { endpoint: String, model: String },
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub inputs: Vec<PathBuf>,
    pub llm: LlmChoice,
    pub prompt_id: String,
    pub temperature: f64,
    pub max_retries: u32,
    pub embedding: EmbeddingChoice,
    pub clean: CleanPolicy,
    pub aliases: Option<PathBuf>,
    pub boilerplate_patterns: Vec<String>,
    /// Match stage runs iff set.
    pub catalog: Option<PathBuf>,
    pub threshold: f64,
    pub concurrency: usize,
    pub no_images: bool,
    pub ocr_command: Option<Vec<String>>,
    pub dpi: u32,
    pub corrections: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub format: OutputFormat,
    /// Emit per-stage wall-clock timings. Off for byte-reproducible output.
    pub timings: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    input: InputSection,
    #[serde(default)]
    llm: LlmSection,
    #[serde(default)]
    embedding: EmbeddingSection,
    #[serde(default)]
    clean: CleanSection,
    #[serde(default)]
    normalize: NormalizeSection,
    #[serde(default, rename = "match")]
    matching: MatchSection,
    #[serde(default)]
    run: RunSection,
    #[serde(default)]
    output: OutputSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct InputSection {
    #[serde(default)]
    paths: Vec<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct LlmSection {
    backend: Option<BackendKind>,
    lexicon: Option<PathBuf>,
    endpoint: Option<String>,
    model: Option<String>,
    prompt_id: Option<String>,
    temperature: Option<f64>,
    max_retries: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmbeddingSection {
    backend: Option<BackendKind>,
    endpoint: Option<String>,
    model: Option<String>,
    dim: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CleanSection {
    min_width: Option<u32>,
    min_height: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct NormalizeSection {
    aliases: Option<PathBuf>,
    #[serde(default)]
    boilerplate_patterns: Vec<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatchSection {
    enabled: Option<bool>,
    catalog: Option<PathBuf>,
    threshold: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    concurrency: Option<usize>,
    no_images: Option<bool>,
    ocr_command: Option<Vec<String>>,
    dpi: Option<u32>,
    corrections: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    dir: Option<PathBuf>,
    format: Option<OutputFormat>,
    timings: Option<bool>,
}

/// Command-line values; any `Some` wins over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub inputs: Vec<PathBuf>,
    pub backend: Option<BackendKind>,
    pub lexicon: Option<PathBuf>,
    pub prompt_id: Option<String>,
    pub temperature: Option<f64>,
    pub catalog: Option<PathBuf>,
    pub threshold: Option<f64>,
    pub no_images: bool,
    pub concurrency: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub format: Option<OutputFormat>,
    pub no_timings: bool,
}

fn rebase(base: &Path, p: PathBuf) -> PathBuf {
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

impl PipelineConfig {
    /// Reads `file` (if any), applies `ov` and validates the result.
    pub fn resolve(file: Option<&Path>, ov: &Overrides) -> Result<Self, ConfigError> {
        let (fc, base) = match file {
            Some(path) => {
                let src = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
                    path: path.display().to_string(),
                    source,
                })?;
                let fc: FileConfig = toml::from_str(&src).map_err(|e| ConfigError::Syntax {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })?;
                (fc, path.parent().unwrap_or(Path::new(".")).to_path_buf())
            }
            None => (FileConfig::default(), PathBuf::from(".")),
        };
        let at = |p: PathBuf| rebase(&base, p);

        let inputs = if ov.inputs.is_empty() {
            fc.input.paths.into_iter().map(at).collect()
        } else {
            ov.inputs.clone()
        };

        let llm_kind = ov.backend.or(fc.llm.backend).unwrap_or(BackendKind::Mock);
        let llm = match llm_kind {
            BackendKind::Mock => LlmChoice::Mock {
                lexicon: ov
                    .lexicon
                    .clone()
                    .or_else(|| fc.llm.lexicon.map(at))
                    .ok_or_else(|| invalid("mock LLM backend needs a lexicon file ([llm] lexicon)"))?,
            },
            BackendKind::Http => LlmChoice::Http {
                endpoint: fc
                    .llm
                    .endpoint
                    .ok_or_else(|| invalid("http LLM backend needs [llm] endpoint"))?,
                model: fc.llm.model.unwrap_or_default(),
            },
        };

        let embed_kind = ov.backend.or(fc.embedding.backend).unwrap_or(BackendKind::Mock);
        let embedding = match embed_kind {
            BackendKind::Mock => EmbeddingChoice::Mock {
                dim: fc.embedding.dim.unwrap_or(256),
            },
            BackendKind::Http => EmbeddingChoice::Http {
                endpoint: fc
                    .embedding
                    .endpoint
                    .ok_or_else(|| invalid("http embedding backend needs [embedding] endpoint"))?,
                model: fc.embedding.model.unwrap_or_default(),
            },
        };

        let catalog = ov.catalog.clone().or_else(|| fc.matching.catalog.map(at));
        let catalog = match (fc.matching.enabled, catalog) {
            (Some(false), _) => None,
            (Some(true), None) => return Err(invalid("match stage enabled but no catalog configured")),
            (_, c) => c,
        };
        if let Some(c) = &catalog {
            if !c.is_file() {
                return Err(invalid(format!("catalog {} does not exist", c.display())));
            }
        }

        let defaults = CleanPolicy::default();
        let cfg = PipelineConfig {
            inputs,
            llm,
            prompt_id: ov
                .prompt_id
                .clone()
                .or(fc.llm.prompt_id)
                .unwrap_or_else(|| "default".into()),
            temperature: ov.temperature.or(fc.llm.temperature).unwrap_or(DEFAULT_TEMPERATURE),
            max_retries: fc.llm.max_retries.unwrap_or(3),
            embedding,
            clean: CleanPolicy {
                min_width: fc.clean.min_width.unwrap_or(defaults.min_width),
                min_height: fc.clean.min_height.unwrap_or(defaults.min_height),
            },
            aliases: fc.normalize.aliases.map(at),
            boilerplate_patterns: fc.normalize.boilerplate_patterns,
            catalog,
            threshold: ov.threshold.or(fc.matching.threshold).unwrap_or(DEFAULT_THRESHOLD),
            concurrency: ov.concurrency.or(fc.run.concurrency).unwrap_or(4),
            no_images: ov.no_images || fc.run.no_images.unwrap_or(false),
            ocr_command: fc.run.ocr_command,
            dpi: fc.run.dpi.unwrap_or(DEFAULT_DPI),
            corrections: fc.run.corrections.map(at),
            output_dir: ov.output_dir.clone().or_else(|| fc.output.dir.map(at)),
            format: ov.format.or(fc.output.format).unwrap_or(OutputFormat::Json),
            timings: !ov.no_timings && fc.output.timings.unwrap_or(true),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.temperature) {
            return Err(invalid(format!("temperature {} outside [0, 1]", self.temperature)));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(invalid(format!("threshold {} outside [0, 1]", self.threshold)));
        }
        if self.concurrency < 1 {
            return Err(invalid("concurrency must be at least 1"));
        }
        if PromptTemplate::builtin(&self.prompt_id).is_none_or(|t| t.id() == "image") {
            return Err(invalid(format!(
                "unknown text prompt {:?} (expected default, prompt1, prompt2 or prompt3)",
                self.prompt_id
            )));
        }
        if let LlmChoice::Mock { lexicon } = &self.llm {
            if !lexicon.is_file() {
                return Err(invalid(format!("lexicon {} does not exist", lexicon.display())));
            }
        }
        if let EmbeddingChoice::Mock { dim: 0 } = self.embedding {
            return Err(invalid("embedding dim must be positive"));
        }
        if let Some(cmd) = &self.ocr_command {
            if cmd.is_empty() {
                return Err(invalid("ocr_command must name a program"));
            }
        }
        Ok(())
    }
}
