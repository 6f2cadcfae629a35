//! A small decoder-only transformer trained with hand-written gradients.
//!
//! The embedding matrix can be tied to the unembedding. Either way the
//! gradient reaching it is kept as two addends, one from the token lookup
//! and one from the logit projection, so each can be logged and the input
//! side rescaled before the optimiser sees it.

mod config;
mod corpus;
mod model;
pub mod ops;
mod optim;
mod params;
mod stats;
mod train;

pub use config::{ModelConfig, TrainConfig};
pub use corpus::{
    batch_from_windows, byte_label, synthetic_text, BatchSampler, Corpus, Window, BYTE_VOCAB, UNK,
};
pub use model::{backward, forward, loss, loss_and_grads, Batch, ForwardCache, Gradients};
pub use optim::Adam;
pub use params::{BlockLayout, Layout, ModelParams, INIT_STD};
pub use stats::{mean_rolling_share, pathway_share, rolling_average, PathwayShare};
pub use train::{train, TrainOutcome, Trainer, DIVERGENCE_LOSS, TRACE_FILE};
