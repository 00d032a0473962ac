//! Attribution-tie detection over social-media comment corpora.
//!
//! The crate covers the whole pipeline: comment ingestion and sentence
//! splitting ([`corpus`]), static word vectors and tf-idf sentence
//! embeddings ([`embedding`]), the attribution-factor catalog
//! ([`factors`]), similarity-based corpus pruning ([`pruning`]), LDA topic
//! modeling ([`topics`]), the cosine cross-attention classifier and its
//! baseline ([`attribution`]), metrics ([`evaluation`]) and the
//! stage-per-command runner behind the `attrib` binary ([`pipeline`]).

pub mod attribution;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod evaluation;
pub mod factors;
pub mod pipeline;
pub mod pruning;
pub mod topics;

pub use error::{Error, Result};
