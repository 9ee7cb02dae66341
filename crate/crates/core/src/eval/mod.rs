//! Categorized query suite, predicate ground truth, completeness and ratings.

mod metrics;
mod predicate;
mod ratings;
mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, BufReader, Read};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pipeline::{RetrievalConfig, SearchEngine, TEMPLATE_VERSION};

pub use metrics::{completeness, display_percent, out_of_scope_score};
pub use predicate::{ground_truth, Predicate};
pub use ratings::{latest_ratings, load_ratings_csv, read_rating_journal, validate_rating, RatingSubmission};
pub use report::{render_report, CategoryRow, ConfigSnapshot, EvaluationReport, QueryResultMetrics, ReportFormat};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("unknown record field {0:?}")]
    UnknownField(String),
    #[error("field {0:?} is not a date field")]
    NotADateField(String),
    #[error("out-of-scope scoring applies only to out-of-scope queries, not {0}")]
    WrongCategory(Category),
    #[error("rating {0} is outside 1..=3")]
    InvalidRating(i64),
    #[error("line {line}: {message}")]
    BadLine { line: usize, message: String },
    #[error("invalid query {query_id}: {message}")]
    InvalidQuery { query_id: String, message: String },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Specific,
    VagueOrBroad,
    Multilingual,
    OutOfScope,
}

impl Category {
    pub const ALL: [Category; 4] = [Self::Specific, Self::VagueOrBroad, Self::Multilingual, Self::OutOfScope];

    pub fn display_name(self) -> &'static str {
        match self {
            Self::Specific => "Specific",
            Self::VagueOrBroad => "Vague or Broad",
            Self::Multilingual => "Multilingual",
            Self::OutOfScope => "Out-of-Scope / Irrelevant",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalQuery {
    pub query_id: String,
    pub text: String,
    pub category: Category,
    #[serde(default = "default_language")]
    pub language_tag: String,
    /// `None` for out-of-scope queries, which expect nothing.
    #[serde(default)]
    pub ground_truth: Option<Predicate>,
    /// Keyword predicate standing in for a judgement the fields cannot express.
    /// Defaults to true for vague or broad queries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub approximate: Option<bool>,
}

fn default_language() -> String {
    "en".into()
}

impl EvalQuery {
    pub fn is_approximate(&self) -> bool {
        self.approximate.unwrap_or(self.category == Category::VagueOrBroad)
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let invalid = |message: &str| EvalError::InvalidQuery { query_id: self.query_id.clone(), message: message.into() };
        if self.query_id.trim().is_empty() {
            return Err(invalid("empty query_id"));
        }
        if self.text.trim().is_empty() {
            return Err(invalid("empty text"));
        }
        match (&self.ground_truth, self.category) {
            (Some(_), Category::OutOfScope) => Err(invalid("out-of-scope queries take no ground truth")),
            (None, c) if c != Category::OutOfScope => Err(invalid("missing ground truth")),
            (Some(p), _) => p.validate(),
            (None, _) => Ok(()),
        }
    }
}

/// Reads a JSONL suite, one query per non-blank line.
pub fn load_suite<R: Read>(source: R) -> Result<Vec<EvalQuery>, EvalError> {
    let mut queries = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in BufReader::new(source).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let query: EvalQuery =
            serde_json::from_str(&line).map_err(|e| EvalError::BadLine { line: i + 1, message: e.to_string() })?;
        query.validate()?;
        if !seen.insert(query.query_id.clone()) {
            return Err(EvalError::BadLine { line: i + 1, message: format!("duplicate query_id {}", query.query_id) });
        }
        queries.push(query);
    }
    Ok(queries)
}

fn run_one(query: &EvalQuery, engine: &SearchEngine, cfg: &RetrievalConfig, rating: Option<u8>) -> QueryResultMetrics {
    let mut m = QueryResultMetrics {
        query_id: query.query_id.clone(),
        text: query.text.clone(),
        category: query.category,
        language_tag: query.language_tag.clone(),
        approximate_ground_truth: query.is_approximate(),
        expected_ids: BTreeSet::new(),
        retrieved_ids: Vec::new(),
        final_ids: Vec::new(),
        retrieval_completeness: None,
        output_completeness: None,
        manual_rating: rating,
        error: None,
    };
    let expected = match &query.ground_truth {
        Some(p) => match ground_truth(p, &engine.corpus) {
            Ok(ids) => ids,
            Err(e) => {
                m.error = Some(format!("ground truth: {e}"));
                return m;
            }
        },
        None => BTreeSet::new(),
    };
    m.expected_ids = expected;
    let outcome = match engine.run_search(&query.text, cfg) {
        Ok(o) => o,
        Err(e) => {
            m.error = Some(format!("{} stage failed: {e}", e.stage()));
            return m;
        }
    };
    if let Some(parse_error) = &outcome.parse_error {
        m.error = Some(format!("model output unparseable: {parse_error}"));
    }
    m.retrieved_ids = outcome.hits.iter().map(|h| h.record_id.clone()).collect();
    m.final_ids = outcome.final_ids();
    let final_set: BTreeSet<String> = m.final_ids.iter().cloned().collect();
    if query.category == Category::OutOfScope {
        // Judged on the final output only: retrieval always returns k candidates.
        let score = out_of_scope_score(query.category, &final_set).ok();
        m.retrieval_completeness = score;
        m.output_completeness = score;
    } else {
        let retrieved: BTreeSet<String> = m.retrieved_ids.iter().cloned().collect();
        m.retrieval_completeness = completeness(&m.expected_ids, &retrieved);
        m.output_completeness = completeness(&m.expected_ids, &final_set);
    }
    m
}

/// Runs every query through the pipeline and aggregates per category.
///
/// Per-query failures are recorded in the report. `parallelism` bounds the
/// number of queries in flight.
pub fn run_suite(
    queries: &[EvalQuery],
    engine: &SearchEngine,
    cfg: &RetrievalConfig,
    ratings: &BTreeMap<String, u8>,
    parallelism: usize,
) -> Result<EvaluationReport, EvalError> {
    cfg.validate().map_err(|e| EvalError::Config(e.to_string()))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| EvalError::Config(e.to_string()))?;
    let mut per_query: Vec<QueryResultMetrics> = pool.install(|| {
        use rayon::prelude::*;
        queries
            .par_iter()
            .map(|q| run_one(q, engine, cfg, ratings.get(&q.query_id).copied()))
            .collect()
    });
    per_query.sort_by(|a, b| a.query_id.cmp(&b.query_id));
    let config = ConfigSnapshot {
        k: cfg.k,
        similarity_floor: cfg.similarity_floor,
        embedder: engine.embedder.spec().clone(),
        client: engine.generator.kind().to_string(),
        template_version: TEMPLATE_VERSION.to_string(),
    };
    Ok(EvaluationReport::assemble(per_query, config))
}
