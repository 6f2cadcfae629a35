//! Config files: TOML with one table per concern. Every key is optional;
//! command-line flags override file values, and unset keys fall back to the
//! library defaults. Unknown tables or keys are errors.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tiebias_core::lens::LensTrainConfig;
use tiebias_core::toylm::{Corpus, ModelConfig, TrainConfig, BYTE_VOCAB};

use crate::error::{usage, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Tokenizer {
    Bytes,
    Words,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSection {
    pub path: Option<PathBuf>,
    pub tokenizer: Option<Tokenizer>,
    pub max_vocab: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub hidden: Option<usize>,
    pub layers: Option<usize>,
    pub heads: Option<usize>,
    pub context: Option<usize>,
    pub mlp_ratio: Option<usize>,
    pub tied: Option<bool>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub steps: Option<usize>,
    pub batch: Option<usize>,
    pub lr: Option<f64>,
    pub warmup_steps: Option<usize>,
    pub input_grad_scale: Option<f64>,
    pub checkpoint_every: Option<usize>,
    pub trace: Option<bool>,
    pub data_seed: Option<u64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LensSection {
    pub steps: Option<usize>,
    pub lr: Option<f64>,
    pub batch: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    pub k: Option<usize>,
    pub embed_dim: Option<usize>,
    pub bins: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub corpus: CorpusSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub lens: LensSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
}

impl FileConfig {
    /// Reads `path`, resolving relative paths inside it against the file's
    /// directory. `None` gives an empty config.
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: FileConfig =
            toml::from_str(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.corpus.path, &mut cfg.train.out] {
            if let Some(rel) = p.as_mut() {
                *rel = absolute(&base.join(&*rel))?;
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config values are always serialisable")
    }
}

pub fn absolute(p: &Path) -> CliResult<PathBuf> {
    std::path::absolute(p).map_err(|e| usage(format!("cannot resolve {}: {e}", p.display())))
}

/// Fills every unset model/train/corpus key with its default so the echo
/// in a run directory is complete.
pub fn complete_training(cfg: &mut FileConfig) {
    let m = ModelConfig::default();
    let t = TrainConfig::default();
    let c = &mut cfg.corpus;
    c.tokenizer.get_or_insert(Tokenizer::Bytes);
    if c.tokenizer == Some(Tokenizer::Words) {
        c.max_vocab.get_or_insert(m.vocab);
    }
    let s = &mut cfg.model;
    s.hidden.get_or_insert(m.hidden);
    s.layers.get_or_insert(m.layers);
    s.heads.get_or_insert(m.heads);
    s.context.get_or_insert(m.context);
    s.mlp_ratio.get_or_insert(m.mlp_ratio);
    s.tied.get_or_insert(m.tied);
    s.seed.get_or_insert(m.seed);
    let s = &mut cfg.train;
    s.steps.get_or_insert(t.steps);
    s.batch.get_or_insert(t.batch);
    s.lr.get_or_insert(t.lr);
    s.warmup_steps.get_or_insert(t.warmup_steps);
    s.input_grad_scale.get_or_insert(t.input_grad_scale);
    s.checkpoint_every.get_or_insert(t.checkpoint_every);
    s.trace.get_or_insert(t.trace);
    s.data_seed.get_or_insert(t.data_seed);
}

pub fn load_corpus(section: &CorpusSection) -> CliResult<(Corpus, Vec<u8>)> {
    let path = section
        .path
        .as_ref()
        .ok_or_else(|| usage("no corpus given (use --corpus or [corpus] path)"))?;
    let bytes = fs::read(path).map_err(|e| usage(format!("cannot read corpus {}: {e}", path.display())))?;
    let corpus = match section.tokenizer.unwrap_or(Tokenizer::Bytes) {
        Tokenizer::Bytes => Corpus::from_bytes(&bytes),
        Tokenizer::Words => {
            let text = std::str::from_utf8(&bytes)
                .map_err(|_| usage(format!("corpus {} is not UTF-8", path.display())))?;
            Corpus::from_words(text, section.max_vocab.unwrap_or(BYTE_VOCAB))?
        }
    };
    if corpus.is_empty() {
        return Err(usage(format!("corpus {} is empty", path.display())));
    }
    Ok((corpus, bytes))
}

/// Model and training configs from a completed config; the vocabulary
/// comes from the corpus.
pub fn model_and_train(cfg: &FileConfig, vocab: usize) -> CliResult<(ModelConfig, TrainConfig)> {
    let m = &cfg.model;
    let t = &cfg.train;
    let model = ModelConfig {
        vocab,
        hidden: m.hidden.expect("completed"),
        layers: m.layers.expect("completed"),
        heads: m.heads.expect("completed"),
        context: m.context.expect("completed"),
        mlp_ratio: m.mlp_ratio.expect("completed"),
        tied: m.tied.expect("completed"),
        seed: m.seed.expect("completed"),
    };
    let train = TrainConfig {
        steps: t.steps.expect("completed"),
        batch: t.batch.expect("completed"),
        lr: t.lr.expect("completed"),
        warmup_steps: t.warmup_steps.expect("completed"),
        input_grad_scale: t.input_grad_scale.expect("completed"),
        checkpoint_every: t.checkpoint_every.expect("completed"),
        trace: t.trace.expect("completed"),
        data_seed: t.data_seed.expect("completed"),
        ..TrainConfig::default()
    };
    model.validate().map_err(|e| usage(e.to_string()))?;
    train.validate().map_err(|e| usage(e.to_string()))?;
    Ok((model, train))
}

pub fn lens_config(s: &LensSection) -> LensTrainConfig {
    let d = LensTrainConfig::default();
    LensTrainConfig {
        steps: s.steps.unwrap_or(d.steps),
        lr: s.lr.unwrap_or(d.lr),
        batch: s.batch.unwrap_or(d.batch),
        seed: s.seed.unwrap_or(d.seed),
    }
}
