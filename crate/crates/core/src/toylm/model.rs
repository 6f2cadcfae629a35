//! Forward and backward passes of the toy decoder.
//!
//! Pre-layernorm blocks with causal multi-head attention and a GELU MLP,
//! learned positions, and a final layernorm before the unembedding. The
//! backward pass keeps the two routes into the embedding matrix apart:
//! `g_in` is what flows back to the looked-up rows, `g_out` is the gradient
//! of the logit projection.

use crate::error::{Error, Result};
use crate::linalg::{gemm, gemm_at, gemm_bt, norm};
use crate::toylm::ops::{
    add_bias, add_column_sums, gelu, gelu_grad, layernorm_backward, layernorm_forward,
    softmax_in_place,
};
use crate::toylm::params::ModelParams;

/// `batch` sequences of `seq` token ids, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub inputs: Vec<usize>,
    pub targets: Vec<usize>,
    pub batch: usize,
    pub seq: usize,
}

impl Batch {
    pub fn positions(&self) -> usize {
        self.batch * self.seq
    }
}

#[derive(Debug, Clone)]
struct BlockCache {
    ln1: Vec<f64>,
    ln1_mean: Vec<f64>,
    ln1_rstd: Vec<f64>,
    qkv: Vec<f64>,
    att: Vec<f64>,
    atty: Vec<f64>,
    mid: Vec<f64>,
    ln2: Vec<f64>,
    ln2_mean: Vec<f64>,
    ln2_rstd: Vec<f64>,
    fc_pre: Vec<f64>,
    fc_act: Vec<f64>,
}

/// Everything the backward pass and the lenses need from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub batch: usize,
    pub seq: usize,
    tokens: Vec<usize>,
    /// `hidden[l]` is the residual stream entering block `l`;
    /// `hidden[L]` is the stream after the last block.
    hidden: Vec<Vec<f64>>,
    blocks: Vec<BlockCache>,
    lnf: Vec<f64>,
    lnf_mean: Vec<f64>,
    lnf_rstd: Vec<f64>,
    logits: Vec<f64>,
    probs: Vec<f64>,
}

impl ForwardCache {
    pub fn positions(&self) -> usize {
        self.batch * self.seq
    }

    /// Residual stream after `layer` blocks, `positions × d`.
    pub fn hidden(&self, layer: usize) -> &[f64] {
        &self.hidden[layer]
    }

    pub fn num_hidden(&self) -> usize {
        self.hidden.len()
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    /// Softmax of the logits, `positions × V`.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Mean next-token cross-entropy in nats.
    pub fn loss(&self, targets: &[usize]) -> f64 {
        let v = self.probs.len() / self.positions().max(1);
        let mut total = 0.0;
        for (i, &t) in targets.iter().enumerate() {
            total -= self.probs[i * v + t].ln();
        }
        total / targets.len() as f64
    }
}

fn check_tokens(params: &ModelParams, ids: &[usize]) -> Result<()> {
    let vocab = params.config.vocab;
    match ids.iter().find(|&&id| id >= vocab) {
        Some(&id) => Err(Error::TokenOutOfRange { id, vocab }),
        None => Ok(()),
    }
}

pub fn forward(params: &ModelParams, tokens: &[usize], batch: usize, seq: usize) -> Result<ForwardCache> {
    let cfg = &params.config;
    if tokens.len() != batch * seq {
        return Err(Error::Shape(format!(
            "{} tokens for a {batch}x{seq} batch",
            tokens.len()
        )));
    }
    if seq == 0 || seq > cfg.context {
        return Err(Error::InvalidArgument(format!(
            "sequence length {seq} outside 1..={}",
            cfg.context
        )));
    }
    check_tokens(params, tokens)?;

    let d = cfg.hidden;
    let v = cfg.vocab;
    let m = cfg.mlp_hidden();
    let n = batch * seq;
    let lay = &params.layout;
    let wte = params.slice(&lay.emb_in);
    let wpe = params.slice(&lay.pos);

    let mut h0 = vec![0.0; n * d];
    for (i, &tok) in tokens.iter().enumerate() {
        let t = i % seq;
        let row = &mut h0[i * d..(i + 1) * d];
        for j in 0..d {
            row[j] = wte[tok * d + j] + wpe[t * d + j];
        }
    }

    let mut hidden = Vec::with_capacity(cfg.layers + 1);
    hidden.push(h0);
    let mut blocks = Vec::with_capacity(cfg.layers);
    for bl in &lay.blocks {
        let x = hidden.last().expect("non-empty");
        let (ln1, ln1_mean, ln1_rstd) =
            layernorm_forward(x, params.slice(&bl.ln1_g), params.slice(&bl.ln1_b), d);
        let mut qkv = vec![0.0; n * 3 * d];
        gemm(&ln1, params.slice(&bl.w_qkv), &mut qkv, n, d, 3 * d, 0.0);
        add_bias(&mut qkv, params.slice(&bl.b_qkv));
        let (att, atty) = attention_forward(&qkv, batch, seq, cfg.heads, d);

        let mut mid = x.clone();
        gemm(&atty, params.slice(&bl.w_proj), &mut mid, n, d, d, 1.0);
        add_bias(&mut mid, params.slice(&bl.b_proj));

        let (ln2, ln2_mean, ln2_rstd) =
            layernorm_forward(&mid, params.slice(&bl.ln2_g), params.slice(&bl.ln2_b), d);
        let mut fc_pre = vec![0.0; n * m];
        gemm(&ln2, params.slice(&bl.w_fc), &mut fc_pre, n, d, m, 0.0);
        add_bias(&mut fc_pre, params.slice(&bl.b_fc));
        let fc_act: Vec<f64> = fc_pre.iter().map(|&z| gelu(z)).collect();

        let mut out = mid.clone();
        gemm(&fc_act, params.slice(&bl.w_out), &mut out, n, m, d, 1.0);
        add_bias(&mut out, params.slice(&bl.b_out));

        blocks.push(BlockCache {
            ln1,
            ln1_mean,
            ln1_rstd,
            qkv,
            att,
            atty,
            mid,
            ln2,
            ln2_mean,
            ln2_rstd,
            fc_pre,
            fc_act,
        });
        hidden.push(out);
    }

    let last = hidden.last().expect("non-empty");
    let (lnf, lnf_mean, lnf_rstd) =
        layernorm_forward(last, params.slice(&lay.lnf_g), params.slice(&lay.lnf_b), d);
    let mut logits = vec![0.0; n * v];
    gemm_bt(&lnf, params.unembedding(), &mut logits, n, d, v, 0.0);
    let mut probs = logits.clone();
    for row in probs.chunks_exact_mut(v) {
        softmax_in_place(row);
    }

    Ok(ForwardCache {
        batch,
        seq,
        tokens: tokens.to_vec(),
        hidden,
        blocks,
        lnf,
        lnf_mean,
        lnf_rstd,
        logits,
        probs,
    })
}

/// Causal multi-head attention. Returns `(probabilities, output)` where the
/// probabilities are laid out `batch × heads × seq × seq`.
fn attention_forward(qkv: &[f64], batch: usize, seq: usize, heads: usize, d: usize) -> (Vec<f64>, Vec<f64>) {
    let hs = d / heads;
    let scale = 1.0 / (hs as f64).sqrt();
    let mut att = vec![0.0; batch * heads * seq * seq];
    let mut out = vec![0.0; batch * seq * d];
    for b in 0..batch {
        for h in 0..heads {
            for t in 0..seq {
                let q = &qkv[(b * seq + t) * 3 * d + h * hs..][..hs];
                let arow = &mut att[((b * heads + h) * seq + t) * seq..][..seq];
                let mut max = f64::NEG_INFINITY;
                for t2 in 0..=t {
                    let k = &qkv[(b * seq + t2) * 3 * d + d + h * hs..][..hs];
                    let s: f64 = q.iter().zip(k).map(|(a, c)| a * c).sum::<f64>() * scale;
                    arow[t2] = s;
                    max = max.max(s);
                }
                let mut sum = 0.0;
                for a in &mut arow[..=t] {
                    *a = (*a - max).exp();
                    sum += *a;
                }
                for a in &mut arow[..=t] {
                    *a /= sum;
                }
                let o = &mut out[(b * seq + t) * d + h * hs..][..hs];
                for t2 in 0..=t {
                    let vv = &qkv[(b * seq + t2) * 3 * d + 2 * d + h * hs..][..hs];
                    let p = arow[t2];
                    for (oi, vi) in o.iter_mut().zip(vv) {
                        *oi += p * vi;
                    }
                }
            }
        }
    }
    (att, out)
}

#[allow(clippy::too_many_arguments)]
fn attention_backward(
    dout: &[f64],
    qkv: &[f64],
    att: &[f64],
    batch: usize,
    seq: usize,
    heads: usize,
    d: usize,
    dqkv: &mut [f64],
) {
    let hs = d / heads;
    let scale = 1.0 / (hs as f64).sqrt();
    let mut datt = vec![0.0; seq];
    for b in 0..batch {
        for h in 0..heads {
            for t in 0..seq {
                let arow = &att[((b * heads + h) * seq + t) * seq..][..seq];
                let dy = &dout[(b * seq + t) * d + h * hs..][..hs];
                // through the weighted sum of values
                for t2 in 0..=t {
                    let vbase = (b * seq + t2) * 3 * d + 2 * d + h * hs;
                    let vv = &qkv[vbase..vbase + hs];
                    datt[t2] = dy.iter().zip(vv).map(|(a, c)| a * c).sum();
                    let p = arow[t2];
                    for (dv, g) in dqkv[vbase..vbase + hs].iter_mut().zip(dy) {
                        *dv += p * g;
                    }
                }
                // through the softmax
                let dot: f64 = (0..=t).map(|t2| arow[t2] * datt[t2]).sum();
                let qbase = (b * seq + t) * 3 * d + h * hs;
                for t2 in 0..=t {
                    let dpre = arow[t2] * (datt[t2] - dot) * scale;
                    if dpre == 0.0 {
                        continue;
                    }
                    let kbase = (b * seq + t2) * 3 * d + d + h * hs;
                    for i in 0..hs {
                        dqkv[qbase + i] += dpre * qkv[kbase + i];
                        dqkv[kbase + i] += dpre * qkv[qbase + i];
                    }
                }
            }
        }
    }
}

/// Gradients of the mean loss, with the embedding pathways kept apart.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    /// Gradient in parameter layout, as handed to the optimiser: the
    /// embedding region(s) hold `λ·g_in (+ g_out when tied)`.
    pub applied: Vec<f64>,
    /// Input-pathway gradient on the token embedding, before scaling (`V × d`).
    pub g_in: Vec<f64>,
    /// Output-pathway gradient on the unembedding rows (`V × d`).
    pub g_out: Vec<f64>,
    /// Input-gradient scale `λ` that was applied.
    pub input_scale: f64,
    pub loss: f64,
}

impl Gradients {
    /// L2 norm of the scaled input-pathway gradient, `λ·‖g_in‖`.
    pub fn input_norm(&self) -> f64 {
        self.input_scale * norm(&self.g_in)
    }

    pub fn output_norm(&self) -> f64 {
        norm(&self.g_out)
    }
}

pub fn backward(params: &ModelParams, cache: &ForwardCache, targets: &[usize], input_scale: f64) -> Result<Gradients> {
    let cfg = &params.config;
    let lay = &params.layout;
    let (d, v, m) = (cfg.hidden, cfg.vocab, cfg.mlp_hidden());
    let (batch, seq) = (cache.batch, cache.seq);
    let n = cache.positions();
    if targets.len() != n {
        return Err(Error::Shape(format!("{} targets for {n} positions", targets.len())));
    }
    check_tokens(params, targets)?;

    let loss = cache.loss(targets);
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("non-finite loss {loss}")));
    }

    let mut grad = vec![0.0; lay.total];

    // d loss / d logits = (p - onehot) / n
    let mut dlogits = cache.probs.clone();
    for (i, &t) in targets.iter().enumerate() {
        dlogits[i * v + t] -= 1.0;
    }
    let inv_n = 1.0 / n as f64;
    for g in &mut dlogits {
        *g *= inv_n;
    }

    let mut g_out = vec![0.0; v * d];
    gemm_at(&dlogits, &cache.lnf, &mut g_out, n, v, d, 0.0);
    let mut dlnf = vec![0.0; n * d];
    gemm(&dlogits, params.unembedding(), &mut dlnf, n, v, d, 0.0);
    drop(dlogits);

    let mut dres = vec![0.0; n * d];
    {
        let (dg, rest) = grad.split_at_mut(lay.lnf_b.start);
        layernorm_backward(
            &dlnf,
            &cache.hidden[cfg.layers],
            &cache.lnf_mean,
            &cache.lnf_rstd,
            params.slice(&lay.lnf_g),
            d,
            &mut dres,
            &mut dg[lay.lnf_g.clone()],
            &mut rest[..d],
        );
    }

    for (l, bl) in lay.blocks.iter().enumerate().rev() {
        let c = &cache.blocks[l];
        let x = &cache.hidden[l];

        // MLP branch: out = mid + gelu(ln2 · W_fc + b_fc) · W_out + b_out
        add_column_sums(&dres, d, &mut grad[bl.b_out.clone()]);
        gemm_at(&c.fc_act, &dres, &mut grad[bl.w_out.clone()], n, m, d, 1.0);
        let mut dfc = vec![0.0; n * m];
        gemm_bt(&dres, params.slice(&bl.w_out), &mut dfc, n, d, m, 0.0);
        for (g, &z) in dfc.iter_mut().zip(&c.fc_pre) {
            *g *= gelu_grad(z);
        }
        add_column_sums(&dfc, m, &mut grad[bl.b_fc.clone()]);
        gemm_at(&c.ln2, &dfc, &mut grad[bl.w_fc.clone()], n, d, m, 1.0);
        let mut dln2 = vec![0.0; n * d];
        gemm_bt(&dfc, params.slice(&bl.w_fc), &mut dln2, n, m, d, 0.0);
        drop(dfc);

        let mut dmid = dres;
        {
            let (lo, hi) = grad.split_at_mut(bl.ln2_b.start);
            layernorm_backward(
                &dln2,
                &c.mid,
                &c.ln2_mean,
                &c.ln2_rstd,
                params.slice(&bl.ln2_g),
                d,
                &mut dmid,
                &mut lo[bl.ln2_g.clone()],
                &mut hi[..d],
            );
        }

        // Attention branch: mid = x + attn(ln1(x)) · W_proj + b_proj
        add_column_sums(&dmid, d, &mut grad[bl.b_proj.clone()]);
        gemm_at(&c.atty, &dmid, &mut grad[bl.w_proj.clone()], n, d, d, 1.0);
        let mut datty = vec![0.0; n * d];
        gemm_bt(&dmid, params.slice(&bl.w_proj), &mut datty, n, d, d, 0.0);
        let mut dqkv = vec![0.0; n * 3 * d];
        attention_backward(&datty, &c.qkv, &c.att, batch, seq, cfg.heads, d, &mut dqkv);
        add_column_sums(&dqkv, 3 * d, &mut grad[bl.b_qkv.clone()]);
        gemm_at(&c.ln1, &dqkv, &mut grad[bl.w_qkv.clone()], n, d, 3 * d, 1.0);
        let mut dln1 = vec![0.0; n * d];
        gemm_bt(&dqkv, params.slice(&bl.w_qkv), &mut dln1, n, 3 * d, d, 0.0);

        let mut dx = dmid;
        {
            let (lo, hi) = grad.split_at_mut(bl.ln1_b.start);
            layernorm_backward(
                &dln1,
                x,
                &c.ln1_mean,
                &c.ln1_rstd,
                params.slice(&bl.ln1_g),
                d,
                &mut dx,
                &mut lo[bl.ln1_g.clone()],
                &mut hi[..d],
            );
        }
        dres = dx;
    }

    // Input pathway: scatter into looked-up rows; positions get the rest.
    let mut g_in = vec![0.0; v * d];
    let pos = lay.pos.clone();
    for (i, &tok) in cache.tokens.iter().enumerate() {
        let t = i % seq;
        let src = &dres[i * d..(i + 1) * d];
        for j in 0..d {
            g_in[tok * d + j] += src[j];
            grad[pos.start + t * d + j] += src[j];
        }
    }

    let emb_in = lay.emb_in.clone();
    match &lay.emb_out {
        None => {
            for ((a, gi), go) in grad[emb_in].iter_mut().zip(&g_in).zip(&g_out) {
                *a = input_scale * gi + go;
            }
        }
        Some(out) => {
            for (a, gi) in grad[emb_in].iter_mut().zip(&g_in) {
                *a = input_scale * gi;
            }
            grad[out.clone()].copy_from_slice(&g_out);
        }
    }

    Ok(Gradients {
        applied: grad,
        g_in,
        g_out,
        input_scale,
        loss,
    })
}

/// Forward plus backward on one batch.
pub fn loss_and_grads(params: &ModelParams, batch: &Batch, input_scale: f64) -> Result<Gradients> {
    if batch.positions() == 0 {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let cache = forward(params, &batch.inputs, batch.batch, batch.seq)?;
    backward(params, &cache, &batch.targets, input_scale)
}

/// Mean loss only.
pub fn loss(params: &ModelParams, batch: &Batch) -> Result<f64> {
    let cache = forward(params, &batch.inputs, batch.batch, batch.seq)?;
    check_tokens(params, &batch.targets)?;
    Ok(cache.loss(&batch.targets))
}
