//! Central finite differences over every model parameter.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tiebias_core::toylm::{loss, loss_and_grads, Batch, ModelConfig, ModelParams};

pub const FD_STEP: f64 = 1e-5;

pub fn small_config(tied: bool) -> ModelConfig {
    ModelConfig {
        vocab: 11,
        hidden: 8,
        layers: 2,
        heads: 2,
        context: 8,
        mlp_ratio: 4,
        tied,
        seed: 5,
    }
}

/// Standard init, then every parameter jittered so that layernorm gains,
/// biases and attention all carry non-trivial gradients.
pub fn jittered_params(cfg: &ModelConfig, seed: u64) -> ModelParams {
    let mut p = ModelParams::init(cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in &mut p.data {
        *v += rng.random_range(-0.3..0.3);
    }
    p
}

pub fn random_batch(cfg: &ModelConfig, batch: usize, seed: u64) -> Batch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = batch * cfg.context;
    Batch {
        inputs: (0..n).map(|_| rng.random_range(0..cfg.vocab)).collect(),
        targets: (0..n).map(|_| rng.random_range(0..cfg.vocab)).collect(),
        batch,
        seq: cfg.context,
    }
}

pub fn central_difference(p: &ModelParams, batch: &Batch, idx: usize) -> f64 {
    let mut plus = p.clone();
    plus.data[idx] += FD_STEP;
    let mut minus = p.clone();
    minus.data[idx] -= FD_STEP;
    (loss(&plus, batch).unwrap() - loss(&minus, batch).unwrap()) / (2.0 * FD_STEP)
}

/// Gradients smaller than this are compared on an absolute scale: with a
/// loss near 2.4 the central difference carries roundoff of a few 1e-11,
/// and some gradients (key biases) are exactly zero.
pub const GRAD_FLOOR: f64 = 1e-6;

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(GRAD_FLOOR)
}

pub fn max_relative_error(p: &ModelParams, batch: &Batch) -> (f64, String) {
    let g = loss_and_grads(p, batch, 1.0).unwrap();
    let mut worst = (0.0, String::new());
    let mut checked = 0;
    for (name, range) in p.layout.named() {
        for idx in range {
            let fd = central_difference(p, batch, idx);
            let err = relative_error(g.applied[idx], fd);
            checked += 1;
            if err > worst.0 {
                worst = (err, format!("{name}[{idx}] analytic {} fd {fd}", g.applied[idx]));
            }
        }
    }
    assert_eq!(checked, p.len());
    worst
}
