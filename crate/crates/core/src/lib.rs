//! Diagnostics for weight-tied language models.
//!
//! * [`tensorio`]: EMBX matrices, checkpoints, traces and reports on disk.
//! * [`embedspace`]: alignment, neighbour overlap, spectral graph distance,
//!   checkpoint drift, norm/frequency and parameter accounting.
//! * [`toylm`]: a small decoder-only transformer with hand-written
//!   gradients that logs the input- and output-pathway gradients on the
//!   embedding matrix and can rescale the input pathway.
//! * [`lens`]: logit lens, tuned-lens translators and per-layer KL profiles.

pub mod embedspace;
pub mod error;
pub mod lens;
pub mod linalg;
pub mod matrix;
pub mod tensorio;
pub mod toylm;

pub use error::{Error, Result};
pub use matrix::{Dtype, EmbeddingMatrix, Role};
