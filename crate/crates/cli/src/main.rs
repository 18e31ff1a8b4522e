use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use pae_core::bench::{bench, doubling_ratios};
use pae_core::config::{BackendKind, ConfigError, OutputFormat, Overrides, PipelineConfig};
use pae_core::eval::{aggregate_report, format_percent, score_document, DatasetRow, GroundTruth, MetricsReport};
use pae_core::exec::Execution;
use pae_core::matching::{load_catalog, MockTrigramProvider, Matcher, DEFAULT_THRESHOLD};
use pae_core::normalize::{merge_attribute_sets, AliasTable};
use pae_core::pipeline::run_pipeline;
use pae_core::report::{match_json, parse_document, render_summary_table, to_pretty, write_atomic};
use pae_core::synth::{generate_from_layout, generate_synthetic_document, SynthSpec};

/// Product attribute extraction from PDF trend reports.
#[derive(Parser)]
#[command(name = "pae", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract, normalize and merge attributes (and match them when a catalog is configured).
    Extract(ExtractArgs),
    /// Match the merged attributes of saved JSON reports against a catalog.
    Match(MatchArgs),
    /// Score saved JSON reports against ground truth.
    Eval(EvalArgs),
    /// Time the pipeline on synthetic reports of increasing size.
    Bench(BenchArgs),
    /// Write a synthetic trend report and its manifest.
    Synth(SynthArgs),
}

#[derive(Args)]
struct ExtractArgs {
    /// PDF files or directories of PDFs. Repeatable.
    #[arg(long = "input", short = 'i')]
    inputs: Vec<PathBuf>,
    #[arg(long, short = 'c')]
    config: Option<PathBuf>,
    /// Report directory.
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
    #[arg(long)]
    format: Option<OutputFormat>,
    #[arg(long)]
    backend: Option<BackendKind>,
    /// Response lexicon for the mock LLM backend.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long)]
    prompt_id: Option<String>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    catalog: Option<PathBuf>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    no_images: bool,
    #[arg(long)]
    concurrency: Option<usize>,
    /// Leave timings out so reports are byte-reproducible.
    #[arg(long)]
    no_timings: bool,
}

#[derive(Args)]
struct MatchArgs {
    /// JSON document reports. Repeatable.
    #[arg(long = "input", short = 'i', required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, required = true)]
    catalog: PathBuf,
    /// Alias rules applied on top of the built-in table.
    #[arg(long)]
    aliases: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    #[arg(long, default_value_t = 256)]
    dim: usize,
    /// Directory for the updated reports; stdout when absent.
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// JSON document reports, one per dataset. Repeatable.
    #[arg(long = "input", short = 'i', required = true)]
    inputs: Vec<PathBuf>,
    /// Ground truth files, paired with --input by position.
    #[arg(long = "truth", short = 't', required = true)]
    truths: Vec<PathBuf>,
    #[arg(long)]
    aliases: Option<PathBuf>,
    #[arg(long, default_value = "table")]
    format: OutputFormat,
}

#[derive(Args)]
struct BenchArgs {
    /// Page counts, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [10usize, 50, 100, 500])]
    pages: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long, default_value_t = 4)]
    concurrency: usize,
    #[arg(long, default_value = "table")]
    format: OutputFormat,
}

#[derive(Args)]
struct SynthArgs {
    /// PDF path; the manifest goes next to it.
    #[arg(long, short = 'o')]
    output: PathBuf,
    #[arg(long, default_value_t = 10)]
    pages: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Inclusive word range per page, e.g. 500-1000.
    #[arg(long, default_value = "500-1000", value_parser = parse_range)]
    words: (usize, usize),
    #[arg(long, default_value = "4-6", value_parser = parse_range)]
    images: (usize, usize),
    /// Render a hand-written TOML layout instead of random pages.
    #[arg(long, conflicts_with_all = ["pages", "seed", "words", "images"])]
    layout: Option<PathBuf>,
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once('-').unwrap_or((s, s));
    let num = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("{x:?}: {e}"));
    Ok((num(a)?, num(b)?))
}

/// Error that maps to exit status 2.
#[derive(Debug, thiserror::Error)]
#[error(transparent)]
struct ConfigFailure(#[from] ConfigError);

fn extract(a: ExtractArgs) -> Result<i32> {
    let ov = Overrides {
        inputs: a.inputs,
        backend: a.backend,
        lexicon: a.lexicon,
        prompt_id: a.prompt_id,
        temperature: a.temperature,
        catalog: a.catalog,
        threshold: a.threshold,
        no_images: a.no_images,
        concurrency: a.concurrency,
        output_dir: a.output,
        format: a.format,
        no_timings: a.no_timings,
    };
    let cfg = PipelineConfig::resolve(a.config.as_deref(), &ov).map_err(ConfigFailure)?;
    let report = match run_pipeline(&cfg) {
        Ok(r) => r,
        Err(pae_core::pipeline::PipelineError::Config(e)) => return Err(ConfigFailure(e).into()),
        Err(e) => return Err(e.into()),
    };
    if cfg.output_dir.is_none() {
        print!("{}", render_summary_table(&report));
    }
    Ok(report.exit_code())
}

fn load_aliases(path: Option<&Path>) -> Result<AliasTable> {
    Ok(match path {
        Some(p) => AliasTable::load(p).map_err(|e| ConfigFailure(ConfigError::Invalid(e.to_string())))?,
        None => AliasTable::builtin(),
    })
}

fn read_json(path: &Path) -> Result<Value> {
    let src = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&src).with_context(|| format!("parsing {}", path.display()))
}

fn rematch(a: MatchArgs) -> Result<i32> {
    if !(0.0..=1.0).contains(&a.threshold) {
        return Err(ConfigFailure(ConfigError::Invalid(format!("threshold {} outside [0, 1]", a.threshold))).into());
    }
    let aliases = load_aliases(a.aliases.as_deref())?;
    let catalog = load_catalog(&a.catalog, &aliases).map_err(|e| ConfigFailure(ConfigError::Invalid(e.to_string())))?;
    let provider = MockTrigramProvider::new(a.dim);
    let matcher = Matcher::new(&provider, a.threshold)?;
    let mut failed = 0;
    for path in &a.inputs {
        let result = (|| -> Result<String> {
            let mut doc = read_json(path)?;
            let pages = parse_document(&doc)?;
            let json_pages = doc["pages"].as_array_mut().expect("checked by parse_document");
            for (saved, jp) in pages.iter().zip(json_pages) {
                let merged = merge_attribute_sets(std::slice::from_ref(&saved.merged), &aliases, Vec::new())?;
                let matches = matcher.match_page(&merged, &catalog)?;
                jp["matches"] = Value::Array(matches.iter().map(match_json).collect());
            }
            Ok(to_pretty(&doc))
        })();
        match result {
            Ok(body) => match &a.output {
                Some(dir) => {
                    std::fs::create_dir_all(dir)?;
                    let name = path.file_name().context("input has no file name")?;
                    write_atomic(&dir.join(name), &body)?;
                }
                None => print!("{body}"),
            },
            Err(e) => {
                log::error!("{}: {e:#}", path.display());
                failed += 1;
            }
        }
    }
    Ok(i32::from(failed > 0))
}

fn metric_line(out: &mut String, label: &str, m: &MetricsReport) {
    let _ = writeln!(
        out,
        "{label:<8} P {:>6}  R {:>6}  F1 {:>6}  Acc {:>6}",
        format_percent(m.precision),
        format_percent(m.recall),
        format_percent(m.f1),
        format_percent(m.accuracy)
    );
}

fn eval(a: EvalArgs) -> Result<i32> {
    if a.inputs.len() != a.truths.len() {
        return Err(ConfigFailure(ConfigError::Invalid(format!(
            "{} reports but {} ground truth files",
            a.inputs.len(),
            a.truths.len()
        )))
        .into());
    }
    let aliases = load_aliases(a.aliases.as_deref())?;
    let mut rows = Vec::new();
    let mut details = String::new();
    let mut json_docs = Vec::new();
    for (input, truth) in a.inputs.iter().zip(&a.truths) {
        let doc = read_json(input)?;
        let name = doc["document"].as_str().map_or_else(|| input.display().to_string(), str::to_string);
        let pages = parse_document(&doc)?;
        let gt = GroundTruth::load(truth, &aliases)?;
        let scores = score_document(&pages, &gt, &aliases)?;
        let _ = writeln!(details, "{name}");
        metric_line(&mut details, "text", &scores.text);
        if let Some(img) = &scores.image {
            metric_line(&mut details, "image", img);
        }
        metric_line(&mut details, "merged", &scores.merged);
        json_docs.push(serde_json::json!({
            "document": name,
            "text": scores.text,
            "image": scores.image,
            "merged": scores.merged,
        }));
        rows.push(DatasetRow {
            name,
            text_f1: scores.text.f1,
            image_f1: scores.image.as_ref().and_then(|m| m.f1),
        });
    }
    let table = aggregate_report(rows)?;
    match a.format {
        OutputFormat::Table => {
            print!("{}", table.render());
            println!();
            print!("{details}");
            println!("Image scores pool every image of a page into one prediction; pages without images are skipped.");
        }
        OutputFormat::Json => print!(
            "{}",
            to_pretty(&serde_json::json!({ "table": table, "documents": json_docs }))
        ),
    }
    Ok(0)
}

fn run_bench(a: BenchArgs) -> Result<i32> {
    if a.concurrency == 0 {
        return Err(ConfigFailure(ConfigError::Invalid("concurrency must be at least 1".into())).into());
    }
    let spec = SynthSpec {
        seed: a.seed,
        ..SynthSpec::default()
    };
    let rows = bench(&a.pages, &spec, Execution::with_limit(a.concurrency), a.repeats)?;
    match a.format {
        OutputFormat::Table => {
            println!("{:>6}  {:>10}", "pages", "seconds");
            for r in &rows {
                println!("{:>6}  {:>10.4}", r.pages, r.seconds);
            }
            let ratios = doubling_ratios(&rows);
            if !ratios.is_empty() {
                let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.2}")).collect();
                println!("per-doubling growth: {}", shown.join(", "));
            }
        }
        OutputFormat::Json => print!("{}", to_pretty(&serde_json::to_value(&rows)?)),
    }
    Ok(0)
}

fn synth(a: SynthArgs) -> Result<i32> {
    let manifest = match &a.layout {
        Some(layout) => generate_from_layout(layout, &a.output)?,
        None => {
            let spec = SynthSpec {
                pages: a.pages,
                words_per_page: a.words,
                images_per_page: a.images,
                seed: a.seed,
            };
            spec.validate().map_err(|e| ConfigFailure(ConfigError::Invalid(e.to_string())))?;
            generate_synthetic_document(&spec, &a.output)?
        }
    };
    println!("{}: {} pages", a.output.display(), manifest.pages.len());
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Extract(a) => extract(a),
        Command::Match(a) => rematch(a),
        Command::Eval(a) => eval(a),
        Command::Bench(a) => run_bench(a),
        Command::Synth(a) => synth(a),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigFailure>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("500-1000"), Ok((500, 1000)));
        assert_eq!(parse_range("4"), Ok((4, 4)));
        assert!(parse_range("a-b").is_err());
    }

    #[test]
    fn cli_shape() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
