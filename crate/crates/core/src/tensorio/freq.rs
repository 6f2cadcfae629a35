use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Occurrence counts indexed by token id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyTable {
    counts: Vec<u64>,
}

impl FrequencyTable {
    pub fn new(counts: Vec<u64>) -> Self {
        Self { counts }
    }

    pub fn from_token_ids(ids: &[usize], vocab: usize) -> Result<Self> {
        let mut counts = vec![0u64; vocab];
        for &id in ids {
            *counts
                .get_mut(id)
                .ok_or(Error::TokenOutOfRange { id, vocab })? += 1;
        }
        Ok(Self { counts })
    }

    pub fn vocab(&self) -> usize {
        self.counts.len()
    }

    pub fn count(&self, id: usize) -> u64 {
        self.counts.get(id).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// `token_id,count` rows; zero counts are omitted.
    pub fn to_text(&self) -> String {
        let mut out = String::from("token_id,count\n");
        for (id, &c) in self.counts.iter().enumerate() {
            if c > 0 {
                writeln!(out, "{id},{c}").unwrap();
            }
        }
        out
    }

    /// Parses the text form. `vocab` bounds the accepted token ids.
    pub fn parse(text: &str, vocab: usize) -> Result<Self> {
        let mut counts = vec![0u64; vocab];
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if idx == 0 && line == "token_id,count" || line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse { line: idx + 1, msg };
            let (id, c) = line
                .split_once(',')
                .ok_or_else(|| err(format!("expected `token_id,count`, found {line:?}")))?;
            let id: usize = id.trim().parse().map_err(|_| err(format!("bad token id {id:?}")))?;
            let c: u64 = c.trim().parse().map_err(|_| err(format!("bad count {c:?}")))?;
            if id >= vocab {
                return Err(err(format!("token id {id} >= vocabulary size {vocab}")));
            }
            counts[id] += c;
        }
        Ok(Self { counts })
    }
}

pub fn write_frequencies(table: &FrequencyTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, table.to_text()).map_err(|e| Error::io(path, e))
}

pub fn read_frequencies(path: impl AsRef<Path>, vocab: usize) -> Result<FrequencyTable> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    FrequencyTable::parse(&text, vocab)
}
