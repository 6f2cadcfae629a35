//! Per-layer affine translators trained to match the final distribution.

use std::f64::consts::LN_2;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lens::head::{kl_rows, log_softmax, LensHead};
use crate::linalg::{gemm_at, gemm_bt};
use crate::toylm::ops::add_column_sums;
use crate::toylm::{batch_from_windows, forward, Adam, Corpus, ModelParams, Window};

/// `u = A·h + b`, with `A` stored row-major (`d × d`).
#[derive(Debug, Clone, PartialEq)]
pub struct Translator {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl Translator {
    pub fn identity(d: usize) -> Self {
        let mut a = vec![0.0; d * d];
        for i in 0..d {
            a[i * d + i] = 1.0;
        }
        Self { a, b: vec![0.0; d] }
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    /// Applies the map to every row of `h`.
    pub fn apply(&self, h: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let n = h.len() / d;
        let mut u = vec![0.0; n * d];
        gemm_bt(h, &self.a, &mut u, n, d, d, 0.0);
        crate::toylm::ops::add_bias(&mut u, &self.b);
        u
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LensTranslatorSet {
    /// One per non-final layer: index `l` acts on the stream entering block `l`.
    pub translators: Vec<Translator>,
    pub steps: usize,
    pub lr: f64,
    /// Layers whose training produced a non-finite or runaway loss; their
    /// translators were frozen at the last good state.
    pub diverged: Vec<usize>,
    /// Mean training KL (nats) of each layer's final step.
    pub final_train_kl: Vec<f64>,
}

impl LensTranslatorSet {
    pub fn identity(layers: usize, d: usize) -> Self {
        Self {
            translators: vec![Translator::identity(d); layers],
            steps: 0,
            lr: 0.0,
            diverged: Vec::new(),
            final_train_kl: vec![f64::NAN; layers],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LensTrainConfig {
    pub steps: usize,
    pub lr: f64,
    /// Sequences per step.
    pub batch: usize,
    pub seed: u64,
}

impl Default for LensTrainConfig {
    fn default() -> Self {
        Self {
            steps: 2000,
            lr: 1e-3,
            batch: 8,
            seed: 0,
        }
    }
}

/// Every fifth window is held out for evaluation; the rest train lenses.
pub fn split_windows(corpus: &Corpus, seq: usize) -> (Vec<Window>, Vec<Window>) {
    let mut train = Vec::new();
    let mut held_out = Vec::new();
    for (i, w) in corpus.windows(seq).into_iter().enumerate() {
        if i % 5 == 4 {
            held_out.push(w);
        } else {
            train.push(w);
        }
    }
    (train, held_out)
}

const RUNAWAY_KL: f64 = 1e3;

/// Mean KL (nats) of the translated lens against `target_logp`, and its
/// gradient w.r.t. `[A, b]` flattened.
pub(crate) fn translator_grad(
    head: &LensHead<'_>,
    translator: &Translator,
    hidden: &[f64],
    target_logp: &[f64],
) -> (f64, Vec<f64>) {
    let d = head.hidden;
    let v = head.vocab;
    let n = hidden.len() / d;
    let u = translator.apply(hidden);
    let (logits, cache) = head.logits_with_cache(&u);
    let logq = log_softmax(&logits, v);
    let kl = kl_rows(target_logp, &logq, v).iter().sum::<f64>() / n as f64;

    // d KL(p‖q) / d logits = q - p
    let inv_n = 1.0 / n as f64;
    let dlogits: Vec<f64> = logq
        .iter()
        .zip(target_logp)
        .map(|(&lq, &lp)| (lq.exp() - lp.exp()) * inv_n)
        .collect();
    let du = head.backward(&dlogits, &u, &cache);

    let mut grad = vec![0.0; d * d + d];
    gemm_at(&du, hidden, &mut grad[..d * d], n, d, d, 0.0);
    add_column_sums(&du, d, &mut grad[d * d..]);
    (kl, grad)
}

/// One Adam step on a translator. Returns the mean KL (nats) before the
/// update.
pub fn translator_step(
    head: &LensHead<'_>,
    translator: &mut Translator,
    adam: &mut Adam,
    hidden: &[f64],
    target_logp: &[f64],
    lr: f64,
) -> f64 {
    let d = head.hidden;
    let (kl, grad) = translator_grad(head, translator, hidden, target_logp);
    let mut flat = translator.a.clone();
    flat.extend_from_slice(&translator.b);
    adam.step(&mut flat, &grad, lr);
    translator.a.copy_from_slice(&flat[..d * d]);
    translator.b.copy_from_slice(&flat[d * d..]);
    kl
}

/// Trains one translator per non-final layer, all from `A = I, b = 0` and
/// all on the same batches. The model is only read.
pub fn train_tuned_lens(params: &ModelParams, corpus: &Corpus, cfg: &LensTrainConfig) -> Result<LensTranslatorSet> {
    let layers = params.config.layers;
    let d = params.config.hidden;
    let v = params.config.vocab;
    let seq = params.config.context;
    let mut set = LensTranslatorSet::identity(layers, d);
    set.steps = cfg.steps;
    set.lr = cfg.lr;
    if cfg.steps == 0 {
        return Ok(set);
    }
    if cfg.batch == 0 || !(cfg.lr > 0.0) {
        return Err(Error::InvalidArgument("lens batch and lr must be positive".into()));
    }
    let (train, _) = split_windows(corpus, seq);
    if train.is_empty() {
        return Err(Error::InvalidArgument("corpus too short for one training window".into()));
    }
    let head = LensHead::of(params);
    let mut adams: Vec<Adam> = (0..layers).map(|_| Adam::new(d * d + d, 0.9, 0.999, 1e-8)).collect();
    let mut last_good = set.translators.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut cursor = order.len();

    for _ in 0..cfg.steps {
        let mut picked = Vec::with_capacity(cfg.batch);
        while picked.len() < cfg.batch {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            picked.push(train[order[cursor]].clone());
            cursor += 1;
        }
        let batch = batch_from_windows(&picked);
        let cache = forward(params, &batch.inputs, batch.batch, batch.seq)?;
        let target = log_softmax(cache.logits(), v);
        for l in 0..layers {
            if set.diverged.contains(&l) {
                continue;
            }
            let kl = translator_step(&head, &mut set.translators[l], &mut adams[l], cache.hidden(l), &target, cfg.lr);
            let healthy = kl.is_finite()
                && kl < RUNAWAY_KL
                && set.translators[l].a.iter().chain(&set.translators[l].b).all(|x| x.is_finite());
            if healthy {
                last_good[l] = set.translators[l].clone();
                set.final_train_kl[l] = kl;
            } else {
                set.translators[l] = last_good[l].clone();
                set.diverged.push(l);
            }
        }
    }
    Ok(set)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LensProfile {
    /// Mean `KL(p_final ‖ p_lens)` in bits for layers `0..=L`; entry `L`
    /// uses the identity on the final stream.
    pub kl_bits: Vec<f64>,
    pub positions: usize,
    pub diverged: Vec<usize>,
}

pub fn nats_to_bits(nats: f64) -> f64 {
    nats / LN_2
}

/// Mean residual KL per layer over the held-out windows of `corpus`.
pub fn lens_profile(params: &ModelParams, translators: &LensTranslatorSet, corpus: &Corpus) -> Result<LensProfile> {
    let layers = params.config.layers;
    let d = params.config.hidden;
    if translators.translators.len() != layers || translators.translators.iter().any(|t| t.dim() != d) {
        return Err(Error::Shape(format!(
            "{} translators for a {layers}-layer model of width {d}",
            translators.translators.len()
        )));
    }
    let (_, held_out) = split_windows(corpus, params.config.context);
    if held_out.is_empty() {
        return Err(Error::InvalidArgument("corpus too short for a held-out window".into()));
    }
    let head = LensHead::of(params);
    let v = head.vocab;
    let mut sums = vec![0.0; layers + 1];
    let mut positions = 0usize;
    for chunk in held_out.chunks(16) {
        let batch = batch_from_windows(chunk);
        let cache = forward(params, &batch.inputs, batch.batch, batch.seq)?;
        let target = log_softmax(cache.logits(), v);
        for (l, sum) in sums.iter_mut().enumerate() {
            let lens_in = if l < layers {
                translators.translators[l].apply(cache.hidden(l))
            } else {
                cache.hidden(l).to_vec()
            };
            let logq = log_softmax(&head.logits(&lens_in), v);
            *sum += kl_rows(&target, &logq, v).iter().sum::<f64>();
        }
        positions += batch.positions();
    }
    Ok(LensProfile {
        kl_bits: sums.iter().map(|s| nats_to_bits(s / positions as f64)).collect(),
        positions,
        diverged: translators.diverged.clone(),
    })
}
