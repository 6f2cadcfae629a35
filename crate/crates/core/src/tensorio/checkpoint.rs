//! Checkpoint directories.
//!
//! A run directory holds one `step_<N>` directory per checkpoint. Each of
//! those contains `emb_in.embx`, `emb_out.embx` (untied runs only),
//! `params.embx` (the full flat parameter vector as a `1 × P` matrix) and a
//! small `checkpoint.txt` naming the step and the output-embedding source.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::matrix::EmbeddingMatrix;
use crate::tensorio::embx::{read_matrix, write_matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointRecord {
    pub step: usize,
    /// Flat parameter vector in the model's layout.
    pub params: Vec<f64>,
    pub emb_in: EmbeddingMatrix,
    /// `None` marks a tied run: the input matrix doubles as the unembedding.
    pub emb_out: Option<EmbeddingMatrix>,
}

impl CheckpointRecord {
    pub fn is_tied(&self) -> bool {
        self.emb_out.is_none()
    }

    /// The matrix that produces logits.
    pub fn unembedding(&self) -> &EmbeddingMatrix {
        self.emb_out.as_ref().unwrap_or(&self.emb_in)
    }
}

pub fn step_dir_name(step: usize) -> String {
    format!("step_{step}")
}

pub fn write_checkpoint(run_dir: impl AsRef<Path>, rec: &CheckpointRecord) -> Result<PathBuf> {
    let dir = run_dir.as_ref().join(step_dir_name(rec.step));
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    write_matrix(&rec.emb_in, dir.join("emb_in.embx"))?;
    let out_marker = match &rec.emb_out {
        Some(m) => {
            write_matrix(m, dir.join("emb_out.embx"))?;
            "emb_out.embx"
        }
        None => "tied",
    };
    let blob = EmbeddingMatrix::new(1, rec.params.len(), rec.params.clone())?;
    write_matrix(&blob, dir.join("params.embx"))?;
    let meta = format!("step={}\nemb_out={out_marker}\n", rec.step);
    let meta_path = dir.join("checkpoint.txt");
    fs::write(&meta_path, meta).map_err(|e| Error::io(&meta_path, e))?;
    Ok(dir)
}

pub fn read_checkpoint(step_dir: impl AsRef<Path>) -> Result<CheckpointRecord> {
    let dir = step_dir.as_ref();
    let meta_path = dir.join("checkpoint.txt");
    let meta = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let mut step = None;
    let mut out_marker = None;
    for (idx, line) in meta.lines().enumerate() {
        let err = |msg: String| Error::Parse { line: idx + 1, msg };
        if line.trim().is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected key=value, found {line:?}")))?;
        match k {
            "step" => step = Some(v.parse().map_err(|_| err(format!("bad step {v:?}")))?),
            "emb_out" => out_marker = Some(v.to_owned()),
            other => return Err(err(format!("unknown key {other:?}"))),
        }
    }
    let step = step.ok_or_else(|| Error::BadHeader(format!("{}: missing step", meta_path.display())))?;
    let emb_in = read_matrix(dir.join("emb_in.embx"))?;
    let emb_out = match out_marker.as_deref() {
        Some("tied") => None,
        Some(file) => Some(read_matrix(dir.join(file))?),
        None => {
            return Err(Error::BadHeader(format!(
                "{}: missing emb_out",
                meta_path.display()
            )))
        }
    };
    let params = read_matrix(dir.join("params.embx"))?.into_data();
    Ok(CheckpointRecord {
        step,
        params,
        emb_in,
        emb_out,
    })
}

/// Lists `(step, path)` for every `step_<N>` directory, ascending by step.
pub fn list_checkpoints(run_dir: impl AsRef<Path>) -> Result<Vec<(usize, PathBuf)>> {
    let run_dir = run_dir.as_ref();
    let entries = fs::read_dir(run_dir).map_err(|e| Error::io(run_dir, e))?;
    let mut found = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(run_dir, e))?;
        let name = entry.file_name();
        let Some(step) = name
            .to_str()
            .and_then(|n| n.strip_prefix("step_"))
            .and_then(|s| s.parse::<usize>().ok())
        else {
            continue;
        };
        if entry.path().is_dir() {
            found.push((step, entry.path()));
        }
    }
    found.sort_by_key(|(s, _)| *s);
    Ok(found)
}

/// Reads every checkpoint of a run in step order.
pub fn read_run(run_dir: impl AsRef<Path>) -> Result<Vec<CheckpointRecord>> {
    list_checkpoints(run_dir)?
        .into_iter()
        .map(|(_, p)| read_checkpoint(p))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(step: usize, tied: bool) -> CheckpointRecord {
        let m = EmbeddingMatrix::new(2, 2, vec![step as f64, 1.0, 2.0, 3.0]).unwrap();
        CheckpointRecord {
            step,
            params: vec![0.5, -0.25, step as f64],
            emb_in: m.clone(),
            emb_out: (!tied).then_some(m),
        }
    }

    #[test]
    fn tied_and_untied_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for (step, tied) in [(0, true), (10, false), (2, true)] {
            write_checkpoint(dir.path(), &record(step, tied)).unwrap();
        }
        let run = read_run(dir.path()).unwrap();
        assert_eq!(run.iter().map(|r| r.step).collect::<Vec<_>>(), [0, 2, 10]);
        assert_eq!(run[2], record(10, false));
        assert!(run[0].is_tied());
        assert!(!dir.path().join("step_0/emb_out.embx").exists());
    }
}
