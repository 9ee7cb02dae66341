//! Subcommand implementations shared by the binary and the tests.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use provsearch_core::corpus::{parse_records, Corpus, ParseOutcome, SourceFormat};
use provsearch_core::eval::{
    latest_ratings, load_ratings_csv, load_suite, read_rating_journal, render_report, run_suite, EvaluationReport,
    ReportFormat,
};
use provsearch_core::index::{self, FlatIndex};
use provsearch_core::pipeline::{build_index_with_progress, Generator, SearchEngine, SearchOutcome, StubGenerator};
use std::collections::BTreeMap;

use crate::config::AppConfig;
use crate::error::CliError;

fn open(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|e| CliError::Input(format!("cannot open {}: {e}", path.display())))
}

pub fn format_for(path: &Path) -> SourceFormat {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("csv") => SourceFormat::Csv,
        _ => SourceFormat::Jsonl,
    }
}

fn report_rejections(outcome: &ParseOutcome, path: &Path) {
    for r in &outcome.rejected {
        eprintln!("warning: {}: row {} rejected: {}", path.display(), r.row, r.reason);
    }
    if outcome.dropped_unknown > 0 {
        eprintln!(
            "warning: {}: dropped {} values from unknown columns {:?}",
            path.display(),
            outcome.dropped_unknown,
            outcome.unknown_columns
        );
    }
}

pub fn load_corpus(path: &Path) -> Result<Corpus, CliError> {
    let outcome = parse_records(open(path)?, format_for(path))?;
    report_rejections(&outcome, path);
    Ok(outcome.corpus)
}

/// Parses `input` and writes the normalized corpus as JSONL to `out`.
pub fn ingest(input: &Path, format: Option<SourceFormat>, out: &Path) -> Result<ParseOutcome, CliError> {
    let outcome = parse_records(open(input)?, format.unwrap_or_else(|| format_for(input)))?;
    report_rejections(&outcome, input);
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    let file = File::create(out).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", out.display())))?;
    let mut w = BufWriter::new(file);
    outcome.corpus.write_jsonl(&mut w).and_then(|_| w.flush()).map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(outcome)
}

/// Embeds every corpus record and writes the index file.
pub fn build(cfg: &AppConfig, corpus_path: &Path, out: &Path, quiet: bool) -> Result<usize, CliError> {
    let corpus = load_corpus(corpus_path)?;
    let embedder = cfg.embedder()?;
    let index = build_index_with_progress(&corpus, embedder.as_ref(), cfg.embedding.batch_size, |done, total| {
        if !quiet {
            eprintln!("embedded {done}/{total}");
        }
    })?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    index::save(&index, out).map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(index.len())
}

/// Corpus, index and embedder from `cfg`, joined with `generator`.
pub fn load_engine(cfg: &AppConfig, generator: Arc<dyn Generator>) -> Result<SearchEngine, CliError> {
    let corpus = load_corpus(&cfg.corpus_path)?;
    let index: FlatIndex = index::load(&cfg.index_path).map_err(|e| {
        CliError::Input(format!("cannot load index {}: {e} (build it with `provsearch index`)", cfg.index_path.display()))
    })?;
    let embedder = cfg.embedder()?;
    Ok(SearchEngine::new(Arc::new(corpus), index.freeze(), Arc::from(embedder), generator)?)
}

pub fn generator(cfg: &AppConfig, stub: bool) -> Result<Arc<dyn Generator>, CliError> {
    Ok(Arc::from(cfg.generator(stub)?))
}

pub fn search(cfg: &AppConfig, query: &str, stub: bool) -> Result<SearchOutcome, CliError> {
    let retrieval = cfg.retrieval()?;
    let engine = load_engine(cfg, generator(cfg, stub)?)?;
    Ok(engine.run_search(query, &retrieval)?)
}

/// Ratings from a `query_id,rating` CSV or a JSONL submission journal.
pub fn load_ratings(path: &Path) -> Result<BTreeMap<String, u8>, CliError> {
    if !path.exists() {
        return Ok(BTreeMap::new());
    }
    Ok(match format_for(path) {
        SourceFormat::Csv => load_ratings_csv(open(path)?)?,
        SourceFormat::Jsonl => latest_ratings(&read_rating_journal(open(path)?)?),
    })
}

pub fn evaluate(engine: &SearchEngine, cfg: &AppConfig, suite: &Path, ratings: &Path) -> Result<EvaluationReport, CliError> {
    let queries = load_suite(open(suite)?)?;
    let ratings = load_ratings(ratings)?;
    Ok(run_suite(&queries, engine, &cfg.retrieval()?, &ratings, cfg.parallelism)?)
}

pub fn save_latest_report(dir: &Path, report: &EvaluationReport) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(e.to_string()))?;
    let json = render_report(report, ReportFormat::Json)?;
    let tmp = dir.join("latest.json.tmp");
    std::fs::write(&tmp, json)
        .and_then(|_| std::fs::rename(&tmp, dir.join("latest.json")))
        .map_err(|e| CliError::Runtime(e.to_string()))
}

pub fn load_latest_report(dir: &Path) -> Option<EvaluationReport> {
    let bytes = std::fs::read(dir.join("latest.json")).ok()?;
    serde_json::from_slice(&bytes).ok()
}

pub fn stub_generator() -> Arc<dyn Generator> {
    Arc::new(StubGenerator)
}
