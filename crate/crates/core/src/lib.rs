//! Conversational exploratory search over a scholarly knowledge graph.
//!
//! The crate covers the offline build (corpus ingest, graph construction,
//! embedding index, thematic clustering and naming, abstract segmentation)
//! and the online side (topic classification, prompt rendering, the dialogue
//! state machine and its session store). Numeric cores are generic over
//! [`Scalar`]; the aliases below fix them to `f64`, which is what the rest of
//! the system uses.

pub mod classify;
pub mod cluster;
pub mod dialogue;
pub mod eval;
pub mod graph;
pub mod index;
pub mod ingest;
pub mod llm;
pub mod provider;
pub mod reference;
pub mod scalar;
pub mod segment;
pub mod snapshot;
pub mod synth;
pub mod text;

pub use scalar::Scalar;

/// Embedding index used by the served system.
pub type EmbeddingIndex = index::VectorIndex<f64>;
/// Search hit produced by [`EmbeddingIndex`].
pub type ScoredHit = index::ScoredHit<f64>;
/// Merge tree over `f64` embeddings.
pub type Dendrogram = cluster::Dendrogram<f64>;
