//! Logit lens and tuned lens over the toy model's residual stream.
//!
//! The logit lens reads an intermediate stream `h` through the model's own
//! final layernorm and unembedding. The tuned lens first applies a learned
//! affine translator per layer. Residual KL is `KL(p_final ‖ p_lens)`,
//! reported in bits.

mod head;
mod io;
mod tuned;

pub use head::{kl_rows, log_softmax, logit_lens, LensHead};
pub use io::{read_translators, write_translators};
pub use tuned::{
    lens_profile, nats_to_bits, split_windows, train_tuned_lens, translator_step, LensProfile,
    LensTrainConfig, LensTranslatorSet, Translator,
};
