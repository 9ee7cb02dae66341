#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use provsearch::commands;
use provsearch::config::AppConfig;
use provsearch::service::{router, AppState};
use provsearch_core::embedding::LocalEmbedder;
use provsearch_core::pipeline::{build_index, SearchEngine};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

pub fn fixture_config(dir: &std::path::Path) -> AppConfig {
    let mut cfg = AppConfig::default();
    cfg.corpus_path = fixtures().join("desk_corpus.csv");
    cfg.index_path = dir.join("corpus.pvix");
    cfg.ratings_path = dir.join("ratings.jsonl");
    cfg.reports_dir = dir.join("reports");
    cfg.service.ui_dir = dir.join("no-ui");
    cfg
}

pub fn stub_state(dir: &std::path::Path) -> AppState {
    let cfg = fixture_config(dir);
    let corpus = commands::load_corpus(&cfg.corpus_path).unwrap();
    let embedder = LocalEmbedder::new(512).unwrap();
    let index = build_index(&corpus, &embedder).unwrap();
    let engine =
        SearchEngine::new(Arc::new(corpus), index.freeze(), Arc::new(embedder), commands::stub_generator()).unwrap();
    AppState::new(cfg, engine)
}

/// Serves `state` on an ephemeral port; returns the base URL.
pub async fn spawn(state: AppState) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move {
        axum::serve(listener, router(Arc::new(state))).await.unwrap();
    });
    format!("http://{addr}")
}
