//! Flat parameter storage with named views.

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::matrix::{EmbeddingMatrix, Role};
use crate::tensorio::CheckpointRecord;
use crate::toylm::config::ModelConfig;

pub const INIT_STD: f64 = 0.02;

/// Offsets of one transformer block. Weight matrices are stored
/// `in × out`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockLayout {
    pub ln1_g: Range<usize>,
    pub ln1_b: Range<usize>,
    pub w_qkv: Range<usize>,
    pub b_qkv: Range<usize>,
    pub w_proj: Range<usize>,
    pub b_proj: Range<usize>,
    pub ln2_g: Range<usize>,
    pub ln2_b: Range<usize>,
    pub w_fc: Range<usize>,
    pub b_fc: Range<usize>,
    pub w_out: Range<usize>,
    pub b_out: Range<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    /// `V × d` token embedding; also the unembedding when tied.
    pub emb_in: Range<usize>,
    /// `context × d` learned positions.
    pub pos: Range<usize>,
    pub blocks: Vec<BlockLayout>,
    pub lnf_g: Range<usize>,
    pub lnf_b: Range<usize>,
    /// `V × d` unembedding rows; absent when tied.
    pub emb_out: Option<Range<usize>>,
    pub total: usize,
}

impl Layout {
    pub fn new(cfg: &ModelConfig) -> Self {
        let d = cfg.hidden;
        let m = cfg.mlp_hidden();
        let mut at = 0;
        let mut take = |n: usize| {
            let r = at..at + n;
            at += n;
            r
        };
        let emb_in = take(cfg.vocab * d);
        let pos = take(cfg.context * d);
        let blocks = (0..cfg.layers)
            .map(|_| BlockLayout {
                ln1_g: take(d),
                ln1_b: take(d),
                w_qkv: take(d * 3 * d),
                b_qkv: take(3 * d),
                w_proj: take(d * d),
                b_proj: take(d),
                ln2_g: take(d),
                ln2_b: take(d),
                w_fc: take(d * m),
                b_fc: take(m),
                w_out: take(m * d),
                b_out: take(d),
            })
            .collect();
        let lnf_g = take(d);
        let lnf_b = take(d);
        let emb_out = (!cfg.tied).then(|| take(cfg.vocab * d));
        Layout {
            emb_in,
            pos,
            blocks,
            lnf_g,
            lnf_b,
            emb_out,
            total: at,
        }
    }

    /// The region that produces logits.
    pub fn unembedding(&self) -> Range<usize> {
        self.emb_out.clone().unwrap_or_else(|| self.emb_in.clone())
    }

    /// Every `(name, range)` pair, in storage order.
    pub fn named(&self) -> Vec<(String, Range<usize>)> {
        let mut v = vec![
            ("emb_in".to_owned(), self.emb_in.clone()),
            ("pos".to_owned(), self.pos.clone()),
        ];
        for (l, b) in self.blocks.iter().enumerate() {
            for (name, r) in [
                ("ln1_g", &b.ln1_g),
                ("ln1_b", &b.ln1_b),
                ("w_qkv", &b.w_qkv),
                ("b_qkv", &b.b_qkv),
                ("w_proj", &b.w_proj),
                ("b_proj", &b.b_proj),
                ("ln2_g", &b.ln2_g),
                ("ln2_b", &b.ln2_b),
                ("w_fc", &b.w_fc),
                ("b_fc", &b.b_fc),
                ("w_out", &b.w_out),
                ("b_out", &b.b_out),
            ] {
                v.push((format!("block{l}.{name}"), r.clone()));
            }
        }
        v.push(("lnf_g".to_owned(), self.lnf_g.clone()));
        v.push(("lnf_b".to_owned(), self.lnf_b.clone()));
        if let Some(r) = &self.emb_out {
            v.push(("emb_out".to_owned(), r.clone()));
        }
        v
    }
}

/// All parameters of one model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub layout: Layout,
    pub data: Vec<f64>,
}

impl ModelParams {
    /// Weight matrices and embeddings from `N(0, 0.02²)`, layernorm gains
    /// one, biases zero.
    pub fn init(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(config);
        let mut data = vec![0.0; layout.total];
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        let mut fill = |r: &Range<usize>, data: &mut [f64]| {
            for v in &mut data[r.clone()] {
                *v = normal.sample(&mut rng);
            }
        };
        fill(&layout.emb_in, &mut data);
        fill(&layout.pos, &mut data);
        for b in &layout.blocks {
            data[b.ln1_g.clone()].fill(1.0);
            data[b.ln2_g.clone()].fill(1.0);
            fill(&b.w_qkv, &mut data);
            fill(&b.w_proj, &mut data);
            fill(&b.w_fc, &mut data);
            fill(&b.w_out, &mut data);
        }
        data[layout.lnf_g.clone()].fill(1.0);
        if let Some(r) = &layout.emb_out {
            fill(r, &mut data);
        }
        Ok(Self {
            config: config.clone(),
            layout,
            data,
        })
    }

    pub fn from_flat(config: &ModelConfig, data: Vec<f64>) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(config);
        if data.len() != layout.total {
            return Err(Error::Shape(format!(
                "{} parameters supplied, layout needs {}",
                data.len(),
                layout.total
            )));
        }
        Ok(Self {
            config: config.clone(),
            layout,
            data,
        })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn slice(&self, r: &Range<usize>) -> &[f64] {
        &self.data[r.clone()]
    }

    pub fn emb_in(&self) -> &[f64] {
        self.slice(&self.layout.emb_in)
    }

    pub fn unembedding(&self) -> &[f64] {
        &self.data[self.layout.unembedding()]
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(Error::Numeric(format!("parameter {i} is not finite"))),
            None => Ok(()),
        }
    }

    fn embedding_matrix(&self, r: Range<usize>, role: Role, labels: Option<&[String]>) -> Result<EmbeddingMatrix> {
        let m = EmbeddingMatrix::new(self.config.vocab, self.config.hidden, self.data[r].to_vec())?
            .with_role(role);
        match labels {
            Some(t) => m.with_tokens(t.to_vec()),
            None => Ok(m),
        }
    }

    pub fn emb_in_matrix(&self, labels: Option<&[String]>) -> Result<EmbeddingMatrix> {
        let role = if self.config.tied { Role::Tied } else { Role::Input };
        self.embedding_matrix(self.layout.emb_in.clone(), role, labels)
    }

    pub fn emb_out_matrix(&self, labels: Option<&[String]>) -> Result<Option<EmbeddingMatrix>> {
        self.layout
            .emb_out
            .clone()
            .map(|r| self.embedding_matrix(r, Role::Output, labels))
            .transpose()
    }

    pub fn to_checkpoint(&self, step: usize, labels: Option<&[String]>) -> Result<CheckpointRecord> {
        Ok(CheckpointRecord {
            step,
            params: self.data.clone(),
            emb_in: self.emb_in_matrix(labels)?,
            emb_out: self.emb_out_matrix(labels)?,
        })
    }

    pub fn from_checkpoint(config: &ModelConfig, rec: &CheckpointRecord) -> Result<Self> {
        if rec.is_tied() != config.tied {
            return Err(Error::Shape(format!(
                "checkpoint at step {} tied={} but config tied={}",
                rec.step,
                rec.is_tied(),
                config.tied
            )));
        }
        Self::from_flat(config, rec.params.clone())
    }
}
