//! Retrieval-augmented question answering over 3D scene knowledge.
//!
//! The pipeline: scene records are indexed by a trainable two-tower
//! retriever keyed only on `(category, instance)`; a query retrieves the
//! top-k entries, expands them to full records plus user-relative spatial
//! facts, and an answerer turns the resulting prompt into text.

pub mod answer;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod knowledge_db;
pub mod qa_corpus;
pub mod scene;
pub mod service;
pub mod spatial;
pub mod two_tower;

pub use error::{Error, Result};
