//! Hierarchical Hebbian n-gram model.
//!
//! A stack of two-point Hopfield-style couplings, each learned with a
//! decaying Hebbian rule, defines a hierarchy of learned n-grams over a
//! character alphabet. The hierarchy tokenizes strings (every learned
//! token decomposes into learned tokens one level down), drives next-token
//! inference and word replay, binds replayed n-grams into per-word
//! embeddings, and compresses each embedding's projector chain with an
//! SVD sweep in the style of matrix product states.

pub mod alphabet;
pub mod compress;
pub mod embedding;
pub mod error;
pub mod hierarchy;
pub mod inference;
pub mod serial;
pub mod stats;
pub mod stream;
pub mod tokenizer;

pub use alphabet::{Alphabet, NGram};
pub use error::ModelError;
pub use hierarchy::{Forgetting, Hierarchy, Level, SynapseMatrix, TrainConfig};
pub use inference::{MeasureConfig, MeasureMode, Superposition};
pub use stream::{NormalizedStream, StreamToken};
pub use tokenizer::{Segmentation, TokenRef};
