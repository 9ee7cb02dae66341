//! Exact top-k cosine search over unit vectors.
//!
//! Vectors live in one contiguous row-major buffer. A search scores every
//! row with [`dot`](crate::embedding::dot) and keeps the best `k` under the
//! order (score descending, record id ascending), so results never depend on
//! insertion order.

mod file;

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{dot, EmbeddingVector};

pub use file::{from_bytes, load, save, to_bytes, FORMAT_VERSION, MAGIC};

/// Maximum deviation of a stored vector's norm from 1.
pub const NORM_TOLERANCE: f64 = 1e-6;

/// Below this many rows the scan stays on the calling thread.
const PARALLEL_THRESHOLD: usize = 4096;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("dimension mismatch: index has {expected}, vector has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("record id {0:?} is already indexed")]
    DuplicateId(String),
    #[error("vector for {id:?} is not unit-norm (norm {norm})")]
    NotNormalized { id: String, norm: f64 },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("index dimension must be positive")]
    ZeroDimension,
    #[error("not an index file (bad magic bytes)")]
    BadMagic,
    #[error("unsupported index format version {0}")]
    UnsupportedVersion(u32),
    #[error("index file is truncated")]
    TruncatedFile,
    #[error("index checksum mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("corrupt index file: {0}")]
    Corrupt(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub record_id: String,
    /// Cosine similarity (inner product of unit vectors).
    pub score: f32,
    /// 1-based position in the result list.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatIndex {
    dimension: usize,
    ids: Vec<String>,
    data: Vec<f32>,
    positions: HashMap<String, usize>,
}

/// Heap entry ordered so that the *worst* kept candidate is at the top.
struct Candidate<'a> {
    score: f32,
    id: &'a str,
}

impl Ord for Candidate<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        // "Greater" means ranked later: lower score, then larger id.
        other
            .score
            .total_cmp(&self.score)
            .then_with(|| self.id.cmp(other.id))
    }
}

impl PartialOrd for Candidate<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Candidate<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate<'_> {}

fn top_k<'a>(scored: impl Iterator<Item = (f32, &'a str)>, k: usize) -> Vec<(f32, &'a str)> {
    let mut heap: BinaryHeap<Candidate<'a>> = BinaryHeap::with_capacity(k + 1);
    for (score, id) in scored {
        let cand = Candidate { score, id };
        if heap.len() < k {
            heap.push(cand);
        } else if let Some(worst) = heap.peek() {
            if cand < *worst {
                heap.pop();
                heap.push(cand);
            }
        }
    }
    heap.into_sorted_vec().into_iter().map(|c| (c.score, c.id)).collect()
}

impl FlatIndex {
    pub fn new(dimension: usize) -> Result<Self, IndexError> {
        if dimension == 0 {
            return Err(IndexError::ZeroDimension);
        }
        Ok(Self { dimension, ids: Vec::new(), data: Vec::new(), positions: HashMap::new() })
    }

    pub fn with_capacity(dimension: usize, capacity: usize) -> Result<Self, IndexError> {
        let mut index = Self::new(dimension)?;
        index.ids.reserve(capacity);
        index.data.reserve(capacity * dimension);
        index.positions.reserve(capacity);
        Ok(index)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn contains(&self, record_id: &str) -> bool {
        self.positions.contains_key(record_id)
    }

    pub fn vector(&self, record_id: &str) -> Option<&[f32]> {
        self.positions.get(record_id).map(|&i| self.row(i))
    }

    /// Row-major vector block in insertion order.
    pub fn raw_vectors(&self) -> &[f32] {
        &self.data
    }

    fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dimension..(i + 1) * self.dimension]
    }

    pub fn add(&mut self, record_id: impl Into<String>, vector: &EmbeddingVector) -> Result<(), IndexError> {
        let record_id = record_id.into();
        if vector.dimension() != self.dimension {
            return Err(IndexError::DimensionMismatch { expected: self.dimension, got: vector.dimension() });
        }
        if self.positions.contains_key(&record_id) {
            return Err(IndexError::DuplicateId(record_id));
        }
        let norm = vector.norm();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(IndexError::NotNormalized { id: record_id, norm });
        }
        self.positions.insert(record_id.clone(), self.ids.len());
        self.ids.push(record_id);
        self.data.extend_from_slice(vector.as_slice());
        Ok(())
    }

    /// Ends the build phase. The shared index can be searched from any number
    /// of threads.
    pub fn freeze(self) -> Arc<FlatIndex> {
        Arc::new(self)
    }

    /// The `min(k, len)` most similar entries, best first.
    pub fn search(&self, query: &EmbeddingVector, k: usize) -> Result<Vec<SearchHit>, IndexError> {
        self.search_slice(query.as_slice(), k)
    }

    pub fn search_slice(&self, query: &[f32], k: usize) -> Result<Vec<SearchHit>, IndexError> {
        if query.len() != self.dimension {
            return Err(IndexError::DimensionMismatch { expected: self.dimension, got: query.len() });
        }
        if k == 0 {
            return Err(IndexError::ZeroK);
        }
        if self.is_empty() {
            return Ok(Vec::new());
        }
        let k = k.min(self.len());
        let best = if self.len() < PARALLEL_THRESHOLD {
            let scored = self
                .data
                .chunks_exact(self.dimension)
                .zip(&self.ids)
                .map(|(row, id)| (dot(row, query), id.as_str()));
            top_k(scored, k)
        } else {
            let chunk_rows = PARALLEL_THRESHOLD / 4;
            let partial: Vec<Vec<(f32, &str)>> = self
                .data
                .par_chunks(chunk_rows * self.dimension)
                .zip(self.ids.par_chunks(chunk_rows))
                .map(|(block, ids)| {
                    let scored = block
                        .chunks_exact(self.dimension)
                        .zip(ids)
                        .map(|(row, id)| (dot(row, query), id.as_str()));
                    top_k(scored, k)
                })
                .collect();
            top_k(partial.into_iter().flatten(), k)
        };
        Ok(best
            .into_iter()
            .enumerate()
            .map(|(i, (score, id))| SearchHit { record_id: id.to_string(), score, rank: i + 1 })
            .collect())
    }
}
