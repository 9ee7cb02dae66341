//! Unit-norm embeddings for documents and queries.

mod local;
mod remote;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::http::HttpError;

pub use local::{embed_local, fnv1a_64, trigram_bucket, LocalEmbedder};
pub use remote::{Endpoint, RemoteEmbedder, DEFAULT_BATCH_SIZE, DEFAULT_PARALLELISM};

/// Smallest dimension accepted by any embedder.
pub const MIN_DIMENSION: usize = 8;

/// Output dimension of `text-embedding-3-large`.
pub const REMOTE_DEFAULT_DIMENSION: usize = 3072;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("cannot normalize a zero vector")]
    ZeroVector,
    #[error("vector has a non-finite component")]
    NonFinite,
    #[error("invalid embedding spec: {0}")]
    InvalidSpec(String),
    #[error("provider returned {got}-dimensional vectors, expected {expected} (check the model name)")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("embedding provider rejected the credential: {0}")]
    Auth(String),
    #[error("embedding provider rate limit: {0}")]
    RateLimited(String),
    #[error("embedding request failed: {0}")]
    Http(String),
    #[error("unexpected embedding response: {0}")]
    BadResponse(String),
}

impl From<HttpError> for EmbedError {
    fn from(e: HttpError) -> Self {
        match e {
            HttpError::Auth { .. } => EmbedError::Auth(e.to_string()),
            HttpError::RateLimited { .. } => EmbedError::RateLimited(e.to_string()),
            HttpError::Decode(msg) => EmbedError::BadResponse(msg),
            other => EmbedError::Http(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provider {
    Remote,
    LocalDeterministic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingSpec {
    pub provider: Provider,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_name: Option<String>,
    pub dimension: usize,
}

impl EmbeddingSpec {
    pub fn local(dimension: usize) -> Result<Self, EmbedError> {
        let spec = Self { provider: Provider::LocalDeterministic, model_name: None, dimension };
        spec.validate()?;
        Ok(spec)
    }

    pub fn remote(model_name: impl Into<String>, dimension: usize) -> Result<Self, EmbedError> {
        let spec = Self { provider: Provider::Remote, model_name: Some(model_name.into()), dimension };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), EmbedError> {
        if self.dimension < MIN_DIMENSION {
            return Err(EmbedError::InvalidSpec(format!(
                "dimension {} is below the minimum of {MIN_DIMENSION}",
                self.dimension
            )));
        }
        if self.provider == Provider::Remote && self.model_name.as_deref().unwrap_or("").is_empty() {
            return Err(EmbedError::InvalidSpec("remote provider needs a model name".into()));
        }
        Ok(())
    }
}

/// A finite vector with Euclidean norm 1 (within float32 rounding).
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f32>);

impl EmbeddingVector {
    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f32> {
        self.0
    }

    /// Wraps components already known to be unit-norm, such as vectors read
    /// back from a verified index file.
    pub(crate) fn from_normalized(components: Vec<f32>) -> Self {
        Self(components)
    }

    /// `i`-th standard basis vector.
    pub fn basis(dimension: usize, i: usize) -> Self {
        let mut v = vec![0.0; dimension];
        v[i] = 1.0;
        Self(v)
    }

    pub fn dot(&self, other: &EmbeddingVector) -> f32 {
        dot(&self.0, &other.0)
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt()
    }
}

impl AsRef<[f32]> for EmbeddingVector {
    fn as_ref(&self) -> &[f32] {
        &self.0
    }
}

/// Sequential float32 dot product. Every similarity score in the crate goes
/// through this function so scores are reproducible bit for bit.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = 0.0f32;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// Scales `v` to unit Euclidean length. The norm is accumulated in f64.
pub fn l2_normalize(v: &[f32]) -> Result<EmbeddingVector, EmbedError> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(EmbedError::NonFinite);
    }
    let norm = v.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt();
    if norm < 1e-12 {
        return Err(EmbedError::ZeroVector);
    }
    Ok(EmbeddingVector(v.iter().map(|&x| (f64::from(x) / norm) as f32).collect()))
}

/// Anything that maps texts to unit vectors of a fixed dimension.
pub trait Embedder: Send + Sync {
    fn spec(&self) -> &EmbeddingSpec;

    /// One vector per input text, in input order.
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError>;

    fn dimension(&self) -> usize {
        self.spec().dimension
    }

    fn embed_one(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let mut out = self.embed(&[text.to_string()])?;
        out.pop().ok_or_else(|| EmbedError::BadResponse("empty embedding batch".into()))
    }
}
