//! Query execution: embed, retrieve top-k, prompt, generate, parse, ground.

mod generate;
mod prompt;
mod response;
pub mod rulebook;

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{augment, AugmentedDocument, Corpus};
use crate::embedding::{EmbedError, Embedder};
use crate::index::{FlatIndex, IndexError, SearchHit};

pub use generate::{GenerateError, Generator, RemoteGenerator, StubGenerator};
pub use prompt::{
    build_prompt, record_marker, ChatMessage, ContextBlock, PromptBundle, NO_CANDIDATES_BLOCK, SYSTEM_TEMPLATE,
    TEMPLATE_VERSION,
};
pub use response::{
    parse_response, render_structured, render_text, Exclusion, GenerationResult, ModelOutput, ObjectSummary,
    ParseError, RelevanceJudgement, RelevanceLabel, NOT_PROVIDED, NOT_SPECIFIED,
};

pub const DEFAULT_K: usize = 10;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid retrieval config: {0}")]
    Config(String),
    #[error("embedding stage: {0}")]
    Embedding(#[from] EmbedError),
    #[error("retrieval stage: {0}")]
    Index(#[from] IndexError),
    #[error("retrieval stage: index holds {0:?} but the corpus does not (index and corpus are out of sync)")]
    MissingDocument(String),
    #[error("generation stage: {0}")]
    Generation(#[from] GenerateError),
}

impl PipelineError {
    pub fn stage(&self) -> &'static str {
        match self {
            Self::Config(_) => "config",
            Self::Embedding(_) => "embedding",
            Self::Index(_) | Self::MissingDocument(_) => "retrieval",
            Self::Generation(_) => "generation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalConfig {
    pub k: usize,
    /// Hits scoring below this are dropped after ranking.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub similarity_floor: Option<f32>,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self { k: DEFAULT_K, similarity_floor: None }
    }
}

impl RetrievalConfig {
    pub fn new(k: usize, similarity_floor: Option<f32>) -> Result<Self, PipelineError> {
        let cfg = Self { k, similarity_floor };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.k == 0 {
            return Err(PipelineError::Config("k must be at least 1".into()));
        }
        if let Some(f) = self.similarity_floor {
            if !(-1.0..=1.0).contains(&f) {
                return Err(PipelineError::Config(format!("similarity_floor {f} is outside [-1, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedDocument {
    pub hit: SearchHit,
    pub document: AugmentedDocument,
}

/// Wall-clock milliseconds per stage.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageTimings {
    pub retrieval_ms: f64,
    pub prompt_ms: f64,
    pub generation_ms: f64,
    pub parse_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub query: String,
    pub hits: Vec<SearchHit>,
    pub result: GenerationResult,
    pub raw_model_output: String,
    /// Set when the model reply had no usable structured block; `result` is then empty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parse_error: Option<String>,
    pub timing: StageTimings,
}

impl SearchOutcome {
    pub fn final_ids(&self) -> Vec<String> {
        self.result.final_ids()
    }

    /// Readable report in the model output's section layout.
    pub fn render_text(&self) -> String {
        let mut s = format!("Input Query: {}\n\n", self.query);
        if let Some(err) = &self.parse_error {
            s.push_str(&format!("The model reply could not be parsed ({err}). Raw reply follows.\n\n"));
            s.push_str(&self.raw_model_output);
            return s;
        }
        s.push_str(&render_text(&self.result.to_model_output()));
        if !self.result.warnings.is_empty() {
            s.push_str("\nWarnings\n\n");
            for w in &self.result.warnings {
                s.push_str(&format!("- {w}\n"));
            }
        }
        s
    }
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

/// Embeds the query and joins the top-k hits with their documents.
pub fn retrieve(
    query: &str,
    cfg: &RetrievalConfig,
    index: &FlatIndex,
    corpus: &Corpus,
    embedder: &dyn Embedder,
) -> Result<Vec<RetrievedDocument>, PipelineError> {
    cfg.validate()?;
    if embedder.dimension() != index.dimension() {
        return Err(PipelineError::Config(format!(
            "embedder produces {}-dimensional vectors but the index holds {}",
            embedder.dimension(),
            index.dimension()
        )));
    }
    let query_vector = embedder.embed_one(query)?;
    let hits = index.search(&query_vector, cfg.k)?;
    hits.into_iter()
        .filter(|h| cfg.similarity_floor.is_none_or(|floor| h.score >= floor))
        .map(|hit| {
            let record = corpus
                .get(&hit.record_id)
                .ok_or_else(|| PipelineError::MissingDocument(hit.record_id.clone()))?;
            Ok(RetrievedDocument { document: augment(record), hit })
        })
        .collect()
}

/// Overwrites source fields of every summary with values from the corpus.
///
/// The public source always comes from the record; other metadata fields are
/// only filled when the model left them unspecified.
pub fn ground_summaries(result: &mut GenerationResult, corpus: &Corpus) {
    for summary in &mut result.relevant_objects {
        let Some(record) = corpus.get(&summary.record_id) else { continue };
        let source = record.public_source();
        if summary.public_source != source {
            if summary.public_source != NOT_SPECIFIED {
                result.warnings.push(format!(
                    "replaced public source {:?} of {} with the catalogue reference",
                    summary.public_source, summary.record_id
                ));
            }
            summary.public_source = source;
        }
        let fill = |slot: &mut String, value: Option<String>| {
            if slot == NOT_SPECIFIED || slot.is_empty() {
                if let Some(v) = value.filter(|v| !v.is_empty()) {
                    *slot = v;
                }
            }
        };
        fill(&mut summary.title, Some(record.title.clone()));
        fill(&mut summary.artist, Some(record.artist.clone()));
        fill(&mut summary.auction_house, Some(record.auction_house.clone()));
        fill(&mut summary.material, record.material.clone());
        fill(&mut summary.dimensions, record.dimensions.clone());
    }
}

/// retrieve → build_prompt → generate → parse_response → ground.
pub fn run_search(
    query: &str,
    cfg: &RetrievalConfig,
    index: &FlatIndex,
    corpus: &Corpus,
    embedder: &dyn Embedder,
    generator: &dyn Generator,
) -> Result<SearchOutcome, PipelineError> {
    let start = Instant::now();
    let mut timing = StageTimings::default();

    let t = Instant::now();
    let context = retrieve(query, cfg, index, corpus, embedder)?;
    timing.retrieval_ms = ms(t);

    let t = Instant::now();
    let prompt = build_prompt(query, &context);
    timing.prompt_ms = ms(t);

    let t = Instant::now();
    let raw = generator.generate(&prompt)?;
    timing.generation_ms = ms(t);

    let t = Instant::now();
    let context_ids = prompt.context_ids();
    let (result, parse_error) = match parse_response(&raw, &context_ids) {
        Ok(mut result) => {
            ground_summaries(&mut result, corpus);
            (result, None)
        }
        Err(e) => {
            tracing::warn!(error = %e, "unparseable model output");
            (GenerationResult::default(), Some(e.to_string()))
        }
    };
    timing.parse_ms = ms(t);
    timing.total_ms = ms(start);

    Ok(SearchOutcome {
        query: query.to_string(),
        hits: context.into_iter().map(|c| c.hit).collect(),
        result,
        raw_model_output: raw,
        parse_error,
        timing,
    })
}

/// Everything a query needs, shareable across threads.
#[derive(Clone)]
pub struct SearchEngine {
    pub corpus: Arc<Corpus>,
    pub index: Arc<FlatIndex>,
    pub embedder: Arc<dyn Embedder>,
    pub generator: Arc<dyn Generator>,
}

impl SearchEngine {
    pub fn new(
        corpus: Arc<Corpus>,
        index: Arc<FlatIndex>,
        embedder: Arc<dyn Embedder>,
        generator: Arc<dyn Generator>,
    ) -> Result<Self, PipelineError> {
        if embedder.dimension() != index.dimension() {
            return Err(PipelineError::Config(format!(
                "embedder dimension {} does not match index dimension {}",
                embedder.dimension(),
                index.dimension()
            )));
        }
        if let Some(id) = index.ids().iter().find(|id| corpus.get(id).is_none()) {
            return Err(PipelineError::MissingDocument(id.clone()));
        }
        Ok(Self { corpus, index, embedder, generator })
    }

    pub fn with_generator(&self, generator: Arc<dyn Generator>) -> Self {
        Self { generator, ..self.clone() }
    }

    pub fn run_search(&self, query: &str, cfg: &RetrievalConfig) -> Result<SearchOutcome, PipelineError> {
        run_search(query, cfg, &self.index, &self.corpus, self.embedder.as_ref(), self.generator.as_ref())
    }
}

/// Augments and embeds every record of `corpus` into a fresh index.
pub fn build_index(corpus: &Corpus, embedder: &dyn Embedder) -> Result<FlatIndex, PipelineError> {
    build_index_with_progress(corpus, embedder, 512, |_, _| {})
}

pub fn build_index_with_progress(
    corpus: &Corpus,
    embedder: &dyn Embedder,
    chunk: usize,
    mut progress: impl FnMut(usize, usize),
) -> Result<FlatIndex, PipelineError> {
    let mut index = FlatIndex::with_capacity(embedder.dimension(), corpus.len())?;
    let records = corpus.records();
    for part in records.chunks(chunk.max(1)) {
        let texts: Vec<String> = part.iter().map(|r| augment(r).text).collect();
        let vectors = embedder.embed(&texts)?;
        for (record, vector) in part.iter().zip(&vectors) {
            index.add(record.record_id.clone(), vector)?;
        }
        progress(index.len(), records.len());
    }
    Ok(index)
}
