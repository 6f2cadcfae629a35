use crate::error::{Error, Result};

/// Shape and initialisation of the toy decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub vocab: usize,
    pub hidden: usize,
    pub layers: usize,
    pub heads: usize,
    pub context: usize,
    pub mlp_ratio: usize,
    pub tied: bool,
    /// Seeds parameter initialisation.
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            vocab: 256,
            hidden: 64,
            layers: 4,
            heads: 4,
            context: 64,
            mlp_ratio: 4,
            tied: true,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.vocab == 0 {
            return bad("vocab must be at least 1".into());
        }
        if self.hidden == 0 || self.heads == 0 || !self.hidden.is_multiple_of(self.heads) {
            return bad(format!(
                "hidden ({}) must be a positive multiple of heads ({})",
                self.hidden, self.heads
            ));
        }
        if self.layers == 0 {
            return bad("layers must be at least 1".into());
        }
        if self.context < 2 {
            return bad("context must be at least 2".into());
        }
        if self.mlp_ratio == 0 {
            return bad("mlp_ratio must be at least 1".into());
        }
        Ok(())
    }

    pub fn head_size(&self) -> usize {
        self.hidden / self.heads
    }

    pub fn mlp_hidden(&self) -> usize {
        self.mlp_ratio * self.hidden
    }
}

/// Optimiser schedule and instrumentation switches.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch: usize,
    pub lr: f64,
    pub warmup_steps: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Multiplier on the input-pathway gradient of the embedding matrix.
    pub input_grad_scale: f64,
    /// 0 disables periodic checkpoints; step 0 and the last step are always kept.
    pub checkpoint_every: usize,
    pub trace: bool,
    /// Seeds batch sampling; kept separate from the init seed so tied and
    /// untied twins can see identical batches.
    pub data_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 500,
            batch: 16,
            lr: 1e-3,
            warmup_steps: 50,
            beta1: 0.9,
            beta2: 0.95,
            eps: 1e-8,
            input_grad_scale: 1.0,
            checkpoint_every: 100,
            trace: true,
            data_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_owned()));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if !(self.input_grad_scale > 0.0 && self.input_grad_scale.is_finite()) {
            return bad("input_grad_scale must be positive");
        }
        if self.batch == 0 {
            return bad("batch must be at least 1");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("adam betas must lie in [0, 1)");
        }
        if !(self.eps > 0.0) {
            return bad("adam eps must be positive");
        }
        Ok(())
    }

    /// Linear warmup to `lr`, then constant. `step` counts from 0.
    pub fn lr_at(&self, step: usize) -> f64 {
        if step < self.warmup_steps {
            self.lr * (step + 1) as f64 / self.warmup_steps as f64
        } else {
            self.lr
        }
    }
}
