//! Multi-hop question answering with generative question decomposition.
//!
//! The pipeline decomposes a multi-hop question into independent,
//! self-contained sub-questions, scores candidate paragraphs conditioned on
//! the question and each sub-question, reads the selected paragraphs with a
//! multi-task model (answer span, answer type, supporting facts), and
//! evaluates answers, supporting facts, and reasoning chains.
//!
//! Interchangeable algorithm variants (decomposers, paragraph scorers,
//! readers, LLM clients) live behind common traits and are registered by
//! name in [`registry`]; run configurations select them at runtime.

pub mod cli;
pub mod corpus;
pub mod decomposer;
pub mod error;
pub mod llm;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod reader;
pub mod registry;
pub mod retrieval;
pub mod text;

pub use error::{Error, Result};
