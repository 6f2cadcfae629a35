//! Training loop with pathway tracing and periodic checkpoints.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::tensorio::{write_checkpoint, write_trace, CheckpointRecord, TraceLog, TraceRow};
use crate::toylm::config::{ModelConfig, TrainConfig};
use crate::toylm::corpus::{BatchSampler, Corpus};
use crate::toylm::model::{backward, forward, Batch, Gradients};
use crate::toylm::optim::Adam;
use crate::toylm::params::ModelParams;

/// Losses above this many nats abort the run.
pub const DIVERGENCE_LOSS: f64 = 1e3;

/// A model, its optimiser state and its batch stream.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub params: ModelParams,
    pub config: TrainConfig,
    adam: Adam,
    sampler: BatchSampler,
    updates: usize,
}

impl Trainer {
    pub fn new(model: &ModelConfig, config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        let params = ModelParams::init(model)?;
        Ok(Self::from_params(params, config))
    }

    pub fn from_params(params: ModelParams, config: &TrainConfig) -> Self {
        let adam = Adam::new(params.len(), config.beta1, config.beta2, config.eps);
        Self {
            params,
            config: config.clone(),
            adam,
            sampler: BatchSampler::new(config.data_seed),
            updates: 0,
        }
    }

    /// Number of optimiser updates applied so far.
    pub fn updates(&self) -> usize {
        self.updates
    }

    pub fn next_batch(&mut self, ids: &[usize]) -> Result<Batch> {
        let seq = self.params.config.context;
        self.sampler.sample(ids, self.config.batch, seq)
    }

    /// Computes gradients on `batch`, applies one Adam update with the
    /// scheduled learning rate, and returns the gradients that were used.
    pub fn step_on(&mut self, batch: &Batch) -> Result<Gradients> {
        let step = self.updates + 1;
        if self.params.data.iter().any(|x| !x.is_finite()) {
            return Err(Error::Diverged { step, loss: f64::NAN });
        }
        let cache = forward(&self.params, &batch.inputs, batch.batch, batch.seq)?;
        let loss = cache.loss(&batch.targets);
        if !loss.is_finite() || loss > DIVERGENCE_LOSS {
            return Err(Error::Diverged { step, loss });
        }
        let grads = backward(&self.params, &cache, &batch.targets, self.config.input_grad_scale)?;
        let lr = self.config.lr_at(self.updates);
        self.adam.step(&mut self.params.data, &grads.applied, lr);
        self.updates += 1;
        Ok(grads)
    }

    pub fn step(&mut self, ids: &[usize]) -> Result<Gradients> {
        let batch = self.next_batch(ids)?;
        self.step_on(&batch)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub checkpoints: Vec<CheckpointRecord>,
    pub trace: TraceLog,
    pub run_dir: Option<PathBuf>,
}

impl TrainOutcome {
    pub fn checkpoint(&self, step: usize) -> Option<&CheckpointRecord> {
        self.checkpoints.iter().find(|c| c.step == step)
    }
}

pub const TRACE_FILE: &str = "trace.csv";

/// Trains from a fresh initialisation.
///
/// Checkpoints are taken at step 0, every `checkpoint_every` updates and
/// after the last update; with `out_dir` they are also written to disk as
/// they are taken, and the trace is written at the end (or at the point of
/// divergence).
pub fn train(
    model: &ModelConfig,
    config: &TrainConfig,
    corpus: &Corpus,
    out_dir: Option<&Path>,
) -> Result<TrainOutcome> {
    if corpus.is_empty() {
        return Err(Error::InvalidArgument("empty corpus".into()));
    }
    if let Some(&id) = corpus.ids.iter().find(|&&id| id >= model.vocab) {
        return Err(Error::TokenOutOfRange { id, vocab: model.vocab });
    }
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let labels = (corpus.vocab() == model.vocab).then_some(corpus.labels.as_slice());
    let mut trainer = Trainer::new(model, config)?;
    let mut checkpoints = Vec::new();
    let mut trace = TraceLog::new();

    let snapshot = |trainer: &Trainer, checkpoints: &mut Vec<CheckpointRecord>| -> Result<()> {
        let rec = trainer.params.to_checkpoint(trainer.updates(), labels)?;
        if let Some(dir) = out_dir {
            write_checkpoint(dir, &rec)?;
        }
        checkpoints.push(rec);
        Ok(())
    };
    snapshot(&trainer, &mut checkpoints)?;

    for s in 1..=config.steps {
        let grads = match trainer.step(&corpus.ids) {
            Ok(g) => g,
            Err(e) => {
                if let Some(dir) = out_dir {
                    write_trace(&trace, dir.join(TRACE_FILE))?;
                }
                return Err(e);
            }
        };
        if config.trace {
            trace.push(TraceRow {
                step: s,
                grad_in: grads.input_norm(),
                grad_out: grads.output_norm(),
                loss: grads.loss,
            });
        }
        let periodic = config.checkpoint_every > 0 && s % config.checkpoint_every == 0;
        if periodic || s == config.steps {
            snapshot(&trainer, &mut checkpoints)?;
        }
    }
    if let Some(dir) = out_dir {
        write_trace(&trace, dir.join(TRACE_FILE))?;
    }
    Ok(TrainOutcome {
        params: trainer.params,
        checkpoints,
        trace,
        run_dir: out_dir.map(Path::to_path_buf),
    })
}
