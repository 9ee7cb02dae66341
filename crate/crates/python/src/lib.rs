//! Python bindings: corpus parsing, local embeddings, the flat index,
//! completeness metrics and an offline search engine.

use std::collections::BTreeSet;
use std::fs::File;
use std::sync::Arc;

use provsearch_core::corpus::{self, SourceFormat};
use provsearch_core::embedding::{self, EmbeddingVector, LocalEmbedder};
use provsearch_core::eval::{self, Category, ReportFormat};
use provsearch_core::index;
use provsearch_core::pipeline::{build_index, RetrievalConfig, SearchEngine, StubGenerator};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

create_exception!(provsearch, ProvsearchError, PyException);

fn err(e: impl std::fmt::Display) -> PyErr {
    ProvsearchError::new_err(e.to_string())
}

fn json_to_py<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

fn format_arg(format: &str) -> PyResult<SourceFormat> {
    format.parse().map_err(PyValueError::new_err)
}

/// An ordered, id-addressable set of auction records.
#[pyclass(frozen)]
pub struct Corpus {
    inner: Arc<corpus::Corpus>,
    rejected_rows: Vec<(usize, String)>,
}

#[pymethods]
impl Corpus {
    /// Parses CSV or JSONL text. Malformed rows are skipped and listed in `rejected`.
    #[staticmethod]
    #[pyo3(signature = (text, format = "csv"))]
    fn parse(text: &str, format: &str) -> PyResult<Self> {
        let outcome = corpus::parse_records(text.as_bytes(), format_arg(format)?).map_err(err)?;
        Ok(Self {
            inner: Arc::new(outcome.corpus),
            rejected_rows: outcome.rejected.into_iter().map(|r| (r.row, r.reason)).collect(),
        })
    }

    /// Reads a `.csv` or `.jsonl` file.
    #[staticmethod]
    fn from_path(path: &str) -> PyResult<Self> {
        let format = if path.to_ascii_lowercase().ends_with(".csv") { SourceFormat::Csv } else { SourceFormat::Jsonl };
        let outcome = corpus::parse_records(File::open(path).map_err(err)?, format).map_err(err)?;
        Ok(Self {
            inner: Arc::new(outcome.corpus),
            rejected_rows: outcome.rejected.into_iter().map(|r| (r.row, r.reason)).collect(),
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// `(row, reason)` for every rejected input row.
    #[getter]
    fn rejected(&self) -> Vec<(usize, String)> {
        self.rejected_rows.clone()
    }

    fn ids(&self) -> Vec<String> {
        self.inner.iter().map(|r| r.record_id.clone()).collect()
    }

    /// The record as a dict, or `None`.
    fn get<'py>(&self, py: Python<'py>, record_id: &str) -> PyResult<Option<Bound<'py, PyAny>>> {
        match self.inner.get(record_id) {
            Some(r) => Ok(Some(json_to_py(py, &serde_json::to_string(r).map_err(err)?)?)),
            None => Ok(None),
        }
    }

    /// Metadata-augmented text of one record.
    fn augment(&self, record_id: &str) -> PyResult<String> {
        let record = self.inner.get(record_id).ok_or_else(|| PyValueError::new_err(format!("no record {record_id:?}")))?;
        Ok(corpus::augment(record).text)
    }
}

/// Hashed character-trigram embedding, L2-normalized.
#[pyfunction]
#[pyo3(signature = (text, dimension = 512))]
fn embed_local(text: &str, dimension: usize) -> PyResult<Vec<f32>> {
    if dimension < embedding::MIN_DIMENSION {
        return Err(PyValueError::new_err(format!("dimension must be at least {}", embedding::MIN_DIMENSION)));
    }
    Ok(embedding::embed_local(text, dimension).into_inner())
}

#[pyfunction]
fn l2_normalize(vector: Vec<f32>) -> PyResult<Vec<f32>> {
    embedding::l2_normalize(&vector).map(EmbeddingVector::into_inner).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn unit(vector: &[f32]) -> PyResult<EmbeddingVector> {
    embedding::l2_normalize(vector).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Exact inner-product index over unit vectors.
#[pyclass]
pub struct FlatIndex {
    inner: index::FlatIndex,
}

#[pymethods]
impl FlatIndex {
    #[new]
    fn new(dimension: usize) -> PyResult<Self> {
        Ok(Self { inner: index::FlatIndex::new(dimension).map_err(err)? })
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Adds a vector; it is normalized first.
    fn add(&mut self, record_id: String, vector: Vec<f32>) -> PyResult<()> {
        self.inner.add(record_id, &unit(&vector)?).map_err(err)
    }

    /// `[(record_id, score, rank), ...]`, best first.
    #[pyo3(signature = (query, k = 10))]
    fn search(&self, py: Python<'_>, query: Vec<f32>, k: usize) -> PyResult<Vec<(String, f32, usize)>> {
        let q = unit(&query)?;
        let hits = py.detach(|| self.inner.search(&q, k)).map_err(err)?;
        Ok(hits.into_iter().map(|h| (h.record_id, h.score, h.rank)).collect())
    }

    fn save(&self, path: &str) -> PyResult<()> {
        index::save(&self.inner, path).map_err(err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self { inner: index::load(path).map_err(err)? })
    }
}

/// Percentage of `expected` present in `observed`; `None` when nothing is expected.
#[pyfunction]
fn completeness(expected: BTreeSet<String>, observed: BTreeSet<String>) -> Option<f64> {
    eval::completeness(&expected, &observed)
}

/// 100 when an out-of-scope query returned nothing, else 0.
#[pyfunction]
fn out_of_scope_score(final_ids: BTreeSet<String>) -> f64 {
    eval::out_of_scope_score(Category::OutOfScope, &final_ids).expect("category is out of scope")
}

/// Offline engine: local embedder plus the rule-based generator.
#[pyclass(frozen)]
pub struct StubSearchEngine {
    engine: SearchEngine,
}

#[pymethods]
impl StubSearchEngine {
    #[new]
    #[pyo3(signature = (corpus, dimension = 512))]
    fn new(py: Python<'_>, corpus: &Corpus, dimension: usize) -> PyResult<Self> {
        let embedder = LocalEmbedder::new(dimension).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let corpus = corpus.inner.clone();
        let idx = py.detach(|| build_index(&corpus, &embedder)).map_err(err)?;
        let engine = SearchEngine::new(corpus, idx.freeze(), Arc::new(embedder), Arc::new(StubGenerator)).map_err(err)?;
        Ok(Self { engine })
    }

    /// Runs one query; returns the outcome as a dict.
    #[pyo3(signature = (query, k = 10))]
    fn search<'py>(&self, py: Python<'py>, query: &str, k: usize) -> PyResult<Bound<'py, PyAny>> {
        let cfg = RetrievalConfig::new(k, None).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let outcome = py.detach(|| self.engine.run_search(query, &cfg)).map_err(err)?;
        json_to_py(py, &serde_json::to_string(&outcome).map_err(err)?)
    }

    /// Runs a JSONL query suite. `format` is "json" (returns a dict), "table-text" or "csv" (return str).
    #[pyo3(signature = (suite_path, ratings_path = None, k = 10, format = "json"))]
    fn evaluate<'py>(
        &self,
        py: Python<'py>,
        suite_path: &str,
        ratings_path: Option<&str>,
        k: usize,
        format: &str,
    ) -> PyResult<Bound<'py, PyAny>> {
        let format: ReportFormat = format.parse().map_err(PyValueError::new_err)?;
        let cfg = RetrievalConfig::new(k, None).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let rendered = py
            .detach(|| -> Result<Vec<u8>, String> {
                let suite = eval::load_suite(File::open(suite_path).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
                let ratings = match ratings_path {
                    Some(p) => eval::load_ratings_csv(File::open(p).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?,
                    None => Default::default(),
                };
                let report = eval::run_suite(&suite, &self.engine, &cfg, &ratings, 4).map_err(|e| e.to_string())?;
                eval::render_report(&report, format).map_err(|e| e.to_string())
            })
            .map_err(err)?;
        let text = String::from_utf8(rendered).map_err(err)?;
        match format {
            ReportFormat::Json => json_to_py(py, &text),
            _ => Ok(text.into_pyobject(py)?.into_any()),
        }
    }
}

#[pymodule]
#[pyo3(name = "provsearch")]
fn provsearch(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ProvsearchError", m.py().get_type::<ProvsearchError>())?;
    m.add_class::<Corpus>()?;
    m.add_class::<FlatIndex>()?;
    m.add_class::<StubSearchEngine>()?;
    m.add_function(wrap_pyfunction!(embed_local, m)?)?;
    m.add_function(wrap_pyfunction!(l2_normalize, m)?)?;
    m.add_function(wrap_pyfunction!(completeness, m)?)?;
    m.add_function(wrap_pyfunction!(out_of_scope_score, m)?)?;
    Ok(())
}
