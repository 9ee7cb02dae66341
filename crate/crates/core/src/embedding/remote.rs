use std::sync::OnceLock;
use std::time::Duration;

use reqwest::blocking::Client;
use serde::Deserialize;
use serde_json::json;

use super::{l2_normalize, EmbedError, Embedder, EmbeddingSpec, EmbeddingVector, Provider};
use crate::http::{self, RetryPolicy};

pub const DEFAULT_BATCH_SIZE: usize = 128;
pub const DEFAULT_PARALLELISM: usize = 4;

/// Base URL plus credential of an OpenAI-style API.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Endpoint {
    pub base_url: String,
    pub api_key: Option<String>,
}

impl Endpoint {
    pub fn new(base_url: impl Into<String>, api_key: Option<String>) -> Self {
        Self { base_url: base_url.into(), api_key }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}/{}", self.base_url.trim_end_matches('/'), path.trim_start_matches('/'))
    }
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingItem>,
}

#[derive(Deserialize)]
struct EmbeddingItem {
    #[serde(default)]
    index: Option<usize>,
    embedding: Vec<f32>,
}

/// Client for `POST {base}/embeddings` with body `{model, input: [..]}`.
pub struct RemoteEmbedder {
    spec: EmbeddingSpec,
    endpoint: Endpoint,
    batch_size: usize,
    parallelism: usize,
    retry: RetryPolicy,
    timeout: Duration,
    // Built on first use: a blocking client must not be created inside an async runtime.
    client: OnceLock<Client>,
}

impl RemoteEmbedder {
    pub fn new(spec: EmbeddingSpec, endpoint: Endpoint) -> Result<Self, EmbedError> {
        spec.validate()?;
        if spec.provider != Provider::Remote {
            return Err(EmbedError::InvalidSpec("RemoteEmbedder needs a remote spec".into()));
        }
        Ok(Self {
            spec,
            endpoint,
            batch_size: DEFAULT_BATCH_SIZE,
            parallelism: DEFAULT_PARALLELISM,
            retry: RetryPolicy::default(),
            timeout: Duration::from_secs(60),
            client: OnceLock::new(),
        })
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size.max(1);
        self
    }

    pub fn with_parallelism(mut self, parallelism: usize) -> Self {
        self.parallelism = parallelism.max(1);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    fn client(&self) -> &Client {
        self.client.get_or_init(|| http::build_client(self.timeout))
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        if self.endpoint.api_key.as_deref().unwrap_or("").is_empty() {
            return Err(EmbedError::Auth("no API key configured (EMBED_API_KEY)".into()));
        }
        let body = json!({ "model": self.spec.model_name, "input": texts });
        let value = http::post_json(
            self.client(),
            &self.endpoint.url("embeddings"),
            self.endpoint.api_key.as_deref(),
            &body,
            &self.retry,
        )?;
        let response: EmbeddingResponse =
            serde_json::from_value(value).map_err(|e| EmbedError::BadResponse(e.to_string()))?;
        if response.data.len() != texts.len() {
            return Err(EmbedError::BadResponse(format!(
                "{} vectors for {} inputs",
                response.data.len(),
                texts.len()
            )));
        }
        let mut slots: Vec<Option<EmbeddingVector>> = vec![None; texts.len()];
        for (pos, item) in response.data.into_iter().enumerate() {
            if item.embedding.len() != self.spec.dimension {
                return Err(EmbedError::DimensionMismatch {
                    expected: self.spec.dimension,
                    got: item.embedding.len(),
                });
            }
            let at = item.index.unwrap_or(pos);
            let slot = slots
                .get_mut(at)
                .ok_or_else(|| EmbedError::BadResponse(format!("index {at} out of range")))?;
            if slot.is_some() {
                return Err(EmbedError::BadResponse(format!("index {at} returned twice")));
            }
            *slot = Some(l2_normalize(&item.embedding)?);
        }
        Ok(slots.into_iter().map(|v| v.expect("every slot filled")).collect())
    }
}

impl Embedder for RemoteEmbedder {
    fn spec(&self) -> &EmbeddingSpec {
        &self.spec
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let batches: Vec<&[String]> = texts.chunks(self.batch_size).collect();
        let mut results: Vec<Option<Result<Vec<EmbeddingVector>, EmbedError>>> =
            (0..batches.len()).map(|_| None).collect();

        // Batches are claimed in order by up to `parallelism` workers.
        let next = std::sync::atomic::AtomicUsize::new(0);
        let done = std::sync::Mutex::new(&mut results);
        std::thread::scope(|scope| {
            for _ in 0..self.parallelism.min(batches.len()) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                    let Some(batch) = batches.get(i) else { break };
                    let out = self.embed_batch(batch);
                    let failed = out.is_err();
                    done.lock().expect("result lock")[i] = Some(out);
                    if failed {
                        next.store(batches.len(), std::sync::atomic::Ordering::SeqCst);
                    }
                });
            }
        });

        let mut vectors = Vec::with_capacity(texts.len());
        for result in results.into_iter().flatten() {
            vectors.extend(result?);
        }
        if vectors.len() != texts.len() {
            return Err(EmbedError::Http("embedding aborted before all batches completed".into()));
        }
        Ok(vectors)
    }
}
