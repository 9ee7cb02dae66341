use std::sync::OnceLock;
use std::time::Duration;

use reqwest::blocking::Client;
use serde_json::json;
use thiserror::Error;

use super::prompt::PromptBundle;
use super::response::{
    render_structured, Exclusion, ModelOutput, ObjectSummary, RelevanceJudgement, RelevanceLabel, NOT_PROVIDED,
    NOT_SPECIFIED,
};
use super::rulebook::{content_terms, missing_terms, split_clauses};
use crate::embedding::Endpoint;
use crate::http::{self, HttpError, RetryPolicy};

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("generation provider rejected the credential: {0}")]
    Auth(String),
    #[error("generation provider rate limit: {0}")]
    RateLimited(String),
    #[error("prompt exceeds the model context window (reduce k or document size): {0}")]
    ContextTooLong(String),
    #[error("generation request failed: {0}")]
    Http(String),
    #[error("unexpected generation response: {0}")]
    BadResponse(String),
}

impl From<HttpError> for GenerateError {
    fn from(e: HttpError) -> Self {
        match &e {
            HttpError::Auth { .. } => GenerateError::Auth(e.to_string()),
            HttpError::RateLimited { .. } => GenerateError::RateLimited(e.to_string()),
            HttpError::Status { status, body }
                if (*status == 400 || *status == 413)
                    && (body.contains("context_length_exceeded") || body.contains("maximum context length")) =>
            {
                GenerateError::ContextTooLong(body.clone())
            }
            HttpError::Decode(msg) => GenerateError::BadResponse(msg.clone()),
            _ => GenerateError::Http(e.to_string()),
        }
    }
}

/// Turns a prompt into the model's raw reply.
pub trait Generator: Send + Sync {
    fn generate(&self, prompt: &PromptBundle) -> Result<String, GenerateError>;

    /// Short name recorded in evaluation snapshots.
    fn kind(&self) -> &'static str;
}

/// Offline generator following the content-term rulebook.
#[derive(Debug, Clone, Copy, Default)]
pub struct StubGenerator;

impl StubGenerator {
    fn summarize(record_id: &str, text: &str) -> ObjectSummary {
        let mut s = ObjectSummary::empty(record_id);
        let mut source = None;
        let mut house = None;
        let mut year = None;
        for (label, value) in split_clauses(text) {
            match label {
                "Title" => {
                    s.title = value.clone();
                    s.description = value.split(". ").next().unwrap_or(&value).trim_end_matches('.').to_string();
                }
                "Artist" => s.artist = value,
                "Auction House" => {
                    s.auction_house = value.clone();
                    house = Some(value);
                }
                "Material" => s.material = value,
                "Dimensions" => s.dimensions = value,
                "Sale Date" => year = value.get(..4).map(str::to_string),
                "Metadata" => {
                    if let Some(start) = value.find("'source': '") {
                        let rest = &value[start + "'source': '".len()..];
                        source = rest.find('\'').map(|end| rest[..end].to_string());
                    }
                }
                _ => {}
            }
        }
        s.location = NOT_SPECIFIED.to_string();
        s.provenance_info = NOT_PROVIDED.to_string();
        s.public_source = match (source, house, year) {
            (Some(url), _, _) => url,
            (None, Some(h), Some(y)) => format!("{h} {y} Auction Catalogue"),
            (None, Some(h), None) => format!("{h} Auction Catalogue"),
            _ => NOT_SPECIFIED.to_string(),
        };
        s
    }

    pub fn decide(prompt: &PromptBundle) -> ModelOutput {
        let terms = content_terms(&prompt.user_query);
        let mut out = ModelOutput::default();
        for block in &prompt.context_blocks {
            let missing = missing_terms(&terms, &block.text);
            if !terms.is_empty() && missing.is_empty() {
                let words: Vec<&str> = terms.iter().map(|t| t.word.as_str()).collect();
                out.relevant_objects.push(Self::summarize(&block.record_id, &block.text));
                out.relevance_labels.push(RelevanceJudgement {
                    record_id: block.record_id.clone(),
                    label: RelevanceLabel::HighlyRelevant,
                    reason: format!("record mentions every query term ({})", words.join(", ")),
                });
            } else {
                let reason = if terms.is_empty() {
                    "the query contains no searchable terms".to_string()
                } else {
                    let words: Vec<&str> = missing.iter().map(|t| t.word.as_str()).collect();
                    format!("record does not mention: {}", words.join(", "))
                };
                out.exclusions.push(Exclusion { record_id: block.record_id.clone(), reason: reason.clone() });
                out.relevance_labels.push(RelevanceJudgement {
                    record_id: block.record_id.clone(),
                    label: RelevanceLabel::Irrelevant,
                    reason,
                });
            }
        }
        out.classification = if out.relevant_objects.is_empty() {
            "out-of-scope".to_string()
        } else {
            "object-based".to_string()
        };
        out
    }
}

impl Generator for StubGenerator {
    fn generate(&self, prompt: &PromptBundle) -> Result<String, GenerateError> {
        Ok(render_structured(&Self::decide(prompt)))
    }

    fn kind(&self) -> &'static str {
        "stub"
    }
}

/// Chat-completions client (`POST {base}/chat/completions`).
pub struct RemoteGenerator {
    endpoint: Endpoint,
    model: String,
    retry: RetryPolicy,
    timeout: Duration,
    client: OnceLock<Client>,
}

impl RemoteGenerator {
    pub fn new(endpoint: Endpoint, model: impl Into<String>) -> Self {
        Self {
            endpoint,
            model: model.into(),
            retry: RetryPolicy::default(),
            timeout: Duration::from_secs(120),
            client: OnceLock::new(),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }
}

impl Generator for RemoteGenerator {
    fn generate(&self, prompt: &PromptBundle) -> Result<String, GenerateError> {
        let key = self.endpoint.api_key.as_deref().filter(|k| !k.is_empty());
        let Some(key) = key else {
            return Err(GenerateError::Auth("no API key configured (GEN_API_KEY)".into()));
        };
        let body = json!({
            "model": self.model,
            "temperature": 0,
            "messages": prompt.messages(),
        });
        let client = self.client.get_or_init(|| http::build_client(self.timeout));
        let value = http::post_json(client, &self.endpoint.url("chat/completions"), Some(key), &body, &self.retry)?;
        value
            .pointer("/choices/0/message/content")
            .and_then(|v| v.as_str())
            .map(str::to_string)
            .ok_or_else(|| GenerateError::BadResponse("missing choices[0].message.content".into()))
    }

    fn kind(&self) -> &'static str {
        "remote"
    }
}
