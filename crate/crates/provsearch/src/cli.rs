use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use provsearch_core::corpus::SourceFormat;
use provsearch_core::eval::{render_report, ReportFormat};

use crate::commands;
use crate::config::AppConfig;
use crate::error::CliError;
use crate::service::{self, AppState};

#[derive(Debug, Parser)]
#[command(name = "provsearch", version, about = "Semantic search over art-auction provenance records")]
pub struct Cli {
    /// TOML config file; environment variables override it.
    #[arg(long, global = true, env = "PROVSEARCH_CONFIG")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate CSV/JSONL records and write the normalized corpus.
    Ingest {
        input: PathBuf,
        #[arg(long)]
        format: Option<SourceFormat>,
        /// Defaults to the configured corpus path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Embed the corpus and write the index file.
    Index {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
    /// Run one query through retrieval and generation.
    Search {
        query: String,
        #[arg(short, long, value_parser = clap::value_parser!(u64).range(1..))]
        k: Option<u64>,
        /// Use the offline rule-based generator instead of the remote model.
        #[arg(long)]
        stub_gen: bool,
        /// Print the full outcome as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Run a query suite and print the completeness/rating report.
    Evaluate {
        suite: PathBuf,
        /// `query_id,rating` CSV or a ratings journal; defaults to the configured journal.
        #[arg(long)]
        ratings: Option<PathBuf>,
        #[arg(long, default_value = "table-text")]
        format: ReportFormat,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(short, long, value_parser = clap::value_parser!(u64).range(1..))]
        k: Option<u64>,
        #[arg(long)]
        stub_gen: bool,
    },
    /// Serve the HTTP API (and the UI, if built).
    Serve {
        #[arg(long)]
        bind: Option<SocketAddr>,
        #[arg(long)]
        ui_dir: Option<PathBuf>,
    },
}

fn stdout_write(bytes: &[u8]) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    out.write_all(bytes).and_then(|_| out.flush()).map_err(|e| CliError::Runtime(e.to_string()))
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = AppConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Ingest { input, format, out } => {
            let out = out.unwrap_or_else(|| cfg.corpus_path.clone());
            let outcome = commands::ingest(&input, format, &out)?;
            println!(
                "ingested {} of {} rows into {} ({} rejected)",
                outcome.corpus.len(),
                outcome.data_rows,
                out.display(),
                outcome.rejected.len()
            );
        }
        Command::Index { corpus, out, quiet } => {
            let corpus = corpus.unwrap_or_else(|| cfg.corpus_path.clone());
            let out = out.unwrap_or_else(|| cfg.index_path.clone());
            let n = commands::build(&cfg, &corpus, &out, quiet)?;
            println!("indexed {n} records into {}", out.display());
        }
        Command::Search { query, k, stub_gen, json } => {
            if let Some(k) = k {
                cfg.retrieval.k = k as usize;
            }
            let outcome = commands::search(&cfg, &query, stub_gen)?;
            if json {
                let mut s = serde_json::to_vec_pretty(&outcome).map_err(|e| CliError::Runtime(e.to_string()))?;
                s.push(b'\n');
                stdout_write(&s)?;
            } else {
                stdout_write(outcome.render_text().as_bytes())?;
            }
        }
        Command::Evaluate { suite, ratings, format, out, k, stub_gen } => {
            if let Some(k) = k {
                cfg.retrieval.k = k as usize;
            }
            cfg.retrieval()?;
            let engine = commands::load_engine(&cfg, commands::generator(&cfg, stub_gen)?)?;
            let ratings = ratings.unwrap_or_else(|| cfg.ratings_path.clone());
            let report = commands::evaluate(&engine, &cfg, &suite, &ratings)?;
            commands::save_latest_report(&cfg.reports_dir, &report)?;
            let bytes = render_report(&report, format)?;
            match out {
                Some(path) => std::fs::write(&path, bytes)
                    .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?,
                None => stdout_write(&bytes)?,
            }
        }
        Command::Serve { bind, ui_dir } => {
            if let Some(b) = bind {
                cfg.service.bind = b;
            }
            if let Some(d) = ui_dir {
                cfg.service.ui_dir = d;
            }
            let state = Arc::new(AppState::load(cfg)?);
            let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Runtime(e.to_string()))?;
            rt.block_on(service::serve(state))?;
        }
    }
    Ok(())
}

