//! Shared variable embeddings for multi-task learning on tabular tasks.
//!
//! Every observed variable and every target class of every task owns a
//! learnable embedding. Embeddings are re-expressed as sparse mixtures of a
//! small pool of shared embeddings, and a single FiLM-conditioned predictor
//! serves all tasks.

pub mod cli;
pub mod entmax;
pub mod error;
pub mod interpretability;
pub mod numerics;
pub mod par;
pub mod predictor;
pub mod regularizers;
pub mod shared_embeddings;
pub mod task_data;
pub mod trainer;

pub use error::{Error, Result};
