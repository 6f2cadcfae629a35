//! `manifest.toml` in every run directory: the completed config plus a
//! content hash over the settings that determine the run and the corpus.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::FileConfig;
use crate::error::{usage, CliResult};

pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    /// SHA-256 over the path-free config echo followed by the corpus bytes.
    pub hash: String,
    pub corpus_sha256: String,
    pub corpus_tokens: usize,
    pub vocab: usize,
    pub config: FileConfig,
}

impl Manifest {
    pub fn new(config: &FileConfig, corpus: &[u8], corpus_tokens: usize, vocab: usize) -> Self {
        let mut settings = config.clone();
        settings.corpus.path = None;
        settings.train.out = None;
        let mut h = Sha256::new();
        h.update(settings.to_toml().as_bytes());
        h.update(b"\n--corpus--\n");
        h.update(corpus);
        Self {
            hash: hex::encode(h.finalize()),
            corpus_sha256: hex::encode(Sha256::digest(corpus)),
            corpus_tokens,
            vocab,
            config: config.clone(),
        }
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        let text = toml::to_string(self).expect("manifest is serialisable");
        let p = dir.join(MANIFEST_FILE);
        fs::write(&p, text).map_err(|e| usage(format!("cannot write {}: {e}", p.display())))
    }

    pub fn read(dir: &Path) -> CliResult<Self> {
        let p = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&p)
            .map_err(|e| usage(format!("{} is not a run directory: {e}", dir.display())))?;
        toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", p.display())))
    }
}
