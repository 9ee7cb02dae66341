//! Application settings: defaults, then an optional TOML file, then
//! environment variables.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use provsearch_core::embedding::{
    Embedder, EmbeddingSpec, Endpoint, LocalEmbedder, Provider, RemoteEmbedder, REMOTE_DEFAULT_DIMENSION,
};
use provsearch_core::pipeline::{Generator, RemoteGenerator, RetrievalConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DEFAULT_LOCAL_DIMENSION: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub corpus_path: PathBuf,
    pub index_path: PathBuf,
    pub ratings_path: PathBuf,
    pub reports_dir: PathBuf,
    pub parallelism: usize,
    pub embedding: EmbeddingConfig,
    pub generation: GenerationConfig,
    pub retrieval: RetrievalSettings,
    pub service: ServiceConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub provider: Provider,
    pub model: String,
    /// Defaults to 512 for the local embedder and 3072 for the remote one.
    pub dimension: Option<usize>,
    pub api_base: String,
    pub api_key: Option<String>,
    pub batch_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub model: String,
    pub api_base: String,
    pub api_key: Option<String>,
    pub timeout_secs: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalSettings {
    pub k: usize,
    pub similarity_floor: Option<f32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: SocketAddr,
    pub ui_dir: PathBuf,
}

impl Default for AppConfig {
    fn default() -> Self {
        Self {
            corpus_path: "data/corpus.jsonl".into(),
            index_path: "data/corpus.pvix".into(),
            ratings_path: "data/ratings.jsonl".into(),
            reports_dir: "data/reports".into(),
            parallelism: 4,
            embedding: EmbeddingConfig::default(),
            generation: GenerationConfig::default(),
            retrieval: RetrievalSettings::default(),
            service: ServiceConfig::default(),
        }
    }
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            provider: Provider::LocalDeterministic,
            model: "text-embedding-3-large".into(),
            dimension: None,
            api_base: "https://api.openai.com/v1".into(),
            api_key: None,
            batch_size: 128,
        }
    }
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self { model: "gpt-4o".into(), api_base: "https://api.openai.com/v1".into(), api_key: None, timeout_secs: 120 }
    }
}

impl Default for RetrievalSettings {
    fn default() -> Self {
        let d = RetrievalConfig::default();
        Self { k: d.k, similarity_floor: d.similarity_floor }
    }
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self { bind: "127.0.0.1:8080".parse().expect("valid default address"), ui_dir: "ui/dist".into() }
    }
}

/// Environment variables read by [`AppConfig::apply_env`].
pub const ENV_KEYS: [&str; 11] = [
    "EMBED_API_BASE",
    "EMBED_API_KEY",
    "EMBED_MODEL",
    "GEN_API_BASE",
    "GEN_API_KEY",
    "GEN_MODEL",
    "PROVSEARCH_CORPUS",
    "PROVSEARCH_INDEX",
    "PROVSEARCH_RATINGS",
    "PROVSEARCH_BIND",
    "PROVSEARCH_K",
];

impl AppConfig {
    /// Defaults, overlaid by `path` (if given) and then by the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", p.display())))?;
                Self::from_toml(&text)?
            }
            None => Self::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Input(format!("invalid config: {e}")))
    }

    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<(), CliError> {
        let get = |k: &str| get(k).filter(|v| !v.is_empty());
        if let Some(v) = get("EMBED_API_BASE") {
            self.embedding.api_base = v;
        }
        if let Some(v) = get("EMBED_API_KEY") {
            self.embedding.api_key = Some(v);
        }
        if let Some(v) = get("EMBED_MODEL") {
            self.embedding.model = v;
            self.embedding.provider = Provider::Remote;
        }
        if let Some(v) = get("GEN_API_BASE") {
            self.generation.api_base = v;
        }
        if let Some(v) = get("GEN_API_KEY") {
            self.generation.api_key = Some(v);
        }
        if let Some(v) = get("GEN_MODEL") {
            self.generation.model = v;
        }
        if let Some(v) = get("PROVSEARCH_CORPUS") {
            self.corpus_path = v.into();
        }
        if let Some(v) = get("PROVSEARCH_INDEX") {
            self.index_path = v.into();
        }
        if let Some(v) = get("PROVSEARCH_RATINGS") {
            self.ratings_path = v.into();
        }
        if let Some(v) = get("PROVSEARCH_BIND") {
            self.service.bind = v.parse().map_err(|e| CliError::Input(format!("PROVSEARCH_BIND {v:?}: {e}")))?;
        }
        if let Some(v) = get("PROVSEARCH_K") {
            self.retrieval.k = v.parse().map_err(|e| CliError::Input(format!("PROVSEARCH_K {v:?}: {e}")))?;
        }
        Ok(())
    }

    pub fn retrieval(&self) -> Result<RetrievalConfig, CliError> {
        RetrievalConfig::new(self.retrieval.k, self.retrieval.similarity_floor)
            .map_err(|e| CliError::Usage(e.to_string()))
    }

    pub fn embedding_spec(&self) -> Result<EmbeddingSpec, CliError> {
        let e = &self.embedding;
        let spec = match e.provider {
            Provider::LocalDeterministic => EmbeddingSpec::local(e.dimension.unwrap_or(DEFAULT_LOCAL_DIMENSION)),
            Provider::Remote => EmbeddingSpec::remote(e.model.clone(), e.dimension.unwrap_or(REMOTE_DEFAULT_DIMENSION)),
        };
        spec.map_err(|err| CliError::Input(err.to_string()))
    }

    pub fn embedder(&self) -> Result<Box<dyn Embedder>, CliError> {
        let spec = self.embedding_spec()?;
        Ok(match spec.provider {
            Provider::LocalDeterministic => {
                Box::new(LocalEmbedder::new(spec.dimension).map_err(|e| CliError::Input(e.to_string()))?)
            }
            Provider::Remote => {
                let endpoint = Endpoint::new(self.embedding.api_base.clone(), self.embedding.api_key.clone());
                Box::new(
                    RemoteEmbedder::new(spec, endpoint)
                        .map_err(|e| CliError::Input(e.to_string()))?
                        .with_batch_size(self.embedding.batch_size)
                        .with_parallelism(self.parallelism),
                )
            }
        })
    }

    /// The remote generator, or `None` when no generation key is configured.
    pub fn remote_generator(&self) -> Option<RemoteGenerator> {
        let key = self.generation.api_key.clone().filter(|k| !k.is_empty())?;
        Some(
            RemoteGenerator::new(Endpoint::new(self.generation.api_base.clone(), Some(key)), self.generation.model.clone())
                .with_timeout(std::time::Duration::from_secs(self.generation.timeout_secs)),
        )
    }

    pub fn generator(&self, stub: bool) -> Result<Box<dyn Generator>, CliError> {
        if stub {
            return Ok(Box::new(provsearch_core::pipeline::StubGenerator));
        }
        match self.remote_generator() {
            Some(g) => Ok(Box::new(g)),
            None => Err(CliError::Auth(
                "no generation API key configured; set GEN_API_KEY or use the stub generator".into(),
            )),
        }
    }
}
