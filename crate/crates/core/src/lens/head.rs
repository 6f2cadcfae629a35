//! The frozen final head shared by the logit and tuned lenses.

use crate::linalg::gemm_bt;
use crate::toylm::ops::{layernorm_backward, layernorm_forward};
use crate::toylm::ModelParams;

/// Final layernorm plus unembedding of a trained model.
#[derive(Debug, Clone, Copy)]
pub struct LensHead<'a> {
    pub lnf_g: &'a [f64],
    pub lnf_b: &'a [f64],
    /// `V × d` unembedding rows.
    pub unembedding: &'a [f64],
    pub hidden: usize,
    pub vocab: usize,
}

impl<'a> LensHead<'a> {
    pub fn of(params: &'a ModelParams) -> Self {
        Self {
            lnf_g: params.slice(&params.layout.lnf_g),
            lnf_b: params.slice(&params.layout.lnf_b),
            unembedding: params.unembedding(),
            hidden: params.config.hidden,
            vocab: params.config.vocab,
        }
    }

    /// `LayerNorm(h) · W_U` for each row of `h`.
    pub fn logits(&self, h: &[f64]) -> Vec<f64> {
        self.logits_with_cache(h).0
    }

    pub(crate) fn logits_with_cache(&self, h: &[f64]) -> (Vec<f64>, LnCache) {
        let d = self.hidden;
        let n = h.len() / d;
        let (ln, mean, rstd) = layernorm_forward(h, self.lnf_g, self.lnf_b, d);
        let mut logits = vec![0.0; n * self.vocab];
        gemm_bt(&ln, self.unembedding, &mut logits, n, d, self.vocab, 0.0);
        (logits, LnCache { mean, rstd })
    }

    /// Gradient w.r.t. `h` given the gradient w.r.t. the logits. The head's
    /// own parameters stay frozen.
    pub(crate) fn backward(&self, dlogits: &[f64], h: &[f64], cache: &LnCache) -> Vec<f64> {
        let d = self.hidden;
        let n = h.len() / d;
        let mut dln = vec![0.0; n * d];
        crate::linalg::gemm(dlogits, self.unembedding, &mut dln, n, self.vocab, d, 0.0);
        let mut dh = vec![0.0; n * d];
        let mut scratch_g = vec![0.0; d];
        let mut scratch_b = vec![0.0; d];
        layernorm_backward(
            &dln,
            h,
            &cache.mean,
            &cache.rstd,
            self.lnf_g,
            d,
            &mut dh,
            &mut scratch_g,
            &mut scratch_b,
        );
        dh
    }
}

pub(crate) struct LnCache {
    mean: Vec<f64>,
    rstd: Vec<f64>,
}

/// Row-wise log-softmax.
pub fn log_softmax(logits: &[f64], vocab: usize) -> Vec<f64> {
    let mut out = logits.to_vec();
    for row in out.chunks_exact_mut(vocab) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        for z in row.iter_mut() {
            *z -= lse;
        }
    }
    out
}

/// `KL(p ‖ q)` in nats for each row, from log-probabilities.
pub fn kl_rows(logp: &[f64], logq: &[f64], vocab: usize) -> Vec<f64> {
    logp.chunks_exact(vocab)
        .zip(logq.chunks_exact(vocab))
        .map(|(lp, lq)| {
            lp.iter()
                .zip(lq)
                .map(|(&a, &b)| {
                    let p = a.exp();
                    if p == 0.0 {
                        0.0
                    } else {
                        p * (a - b)
                    }
                })
                .sum::<f64>()
                .max(0.0)
        })
        .collect()
}

/// Logit-lens distribution (probabilities) for each row of `h`.
pub fn logit_lens(params: &ModelParams, h: &[f64]) -> Vec<f64> {
    let head = LensHead::of(params);
    log_softmax(&head.logits(h), head.vocab)
        .into_iter()
        .map(f64::exp)
        .collect()
}
