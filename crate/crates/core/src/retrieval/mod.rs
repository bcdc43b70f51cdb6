//! Stratified retrieval evaluation.
//!
//! A query is ranked against the class-matched part of a pool. Same-instance
//! references from the query's own sequence never count, and the illumination
//! and viewpoint filters only ever remove same-instance references.

mod eval;
mod protocol;

pub use eval::{average_precision, evaluate, evaluate_with, EvalReport, QueryDetail, TopK};
pub use protocol::{
    build_retrieval_set, illumination_mode, similarity, viewpoint_grade, EvalConfig, EvalItem, HardRule, Illumination,
    IlluminationFilter, RetrievalSet, SimilarityMode, ViewpointFilter, ViewpointGrade,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RetrievalError {
    #[error("zero vector cannot be compared under cosine similarity")]
    ZeroVector,
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("invalid config: {0}")]
    Config(String),
}
