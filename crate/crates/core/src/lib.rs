//! Knowledge-graph path sampling, prompt generation, embedding baselines and
//! evaluation for multi-hop link and relation prediction with language models.

pub mod baselines;
pub mod client;
pub mod config;
pub mod error;
pub mod eval;
pub mod graph;
pub mod ingest;
pub mod io;
pub mod pipeline;
pub mod promptgen;
pub mod sampler;

pub use error::{Error, Result};
pub use graph::{KnowledgeGraph, NodeId, RelationId, Triple};
