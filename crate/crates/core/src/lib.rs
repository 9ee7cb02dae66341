//! Semantic provenance search over art-auction records: metadata-augmented
//! documents, unit-norm embeddings, an exact inner-product index, a grounded
//! generation pipeline and a completeness/rating evaluation harness.

pub mod corpus;
pub mod embedding;
pub mod eval;
pub mod http;
pub mod index;
pub mod pipeline;
