#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs::File;
use std::path::PathBuf;
use std::sync::Arc;

use provsearch_core::corpus::{parse_records, Corpus, SourceFormat};
use provsearch_core::embedding::LocalEmbedder;
use provsearch_core::eval::{load_ratings_csv, load_suite, EvalQuery};
use provsearch_core::pipeline::{build_index, SearchEngine, StubGenerator};

pub const FIXTURE_DIM: usize = 512;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn fixture_corpus() -> Corpus {
    let outcome = parse_records(File::open(fixture("desk_corpus.csv")).unwrap(), SourceFormat::Csv).unwrap();
    assert!(outcome.rejected.is_empty(), "{:?}", outcome.rejected);
    outcome.corpus
}

pub fn stub_engine() -> SearchEngine {
    let corpus = fixture_corpus();
    let embedder = LocalEmbedder::new(FIXTURE_DIM).unwrap();
    let index = build_index(&corpus, &embedder).unwrap();
    SearchEngine::new(Arc::new(corpus), index.freeze(), Arc::new(embedder), Arc::new(StubGenerator)).unwrap()
}

pub fn fixture_suite() -> Vec<EvalQuery> {
    load_suite(File::open(fixture("eval_suite.jsonl")).unwrap()).unwrap()
}

pub fn fixture_ratings() -> BTreeMap<String, u8> {
    load_ratings_csv(File::open(fixture("ratings.csv")).unwrap()).unwrap()
}
