//! How far embedding matrices move across checkpoints.

use crate::embedspace::align::{mean_defined, row_cosines};
use crate::error::{Error, Result};
use crate::matrix::EmbeddingMatrix;
use crate::tensorio::CheckpointRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingSide {
    Input,
    /// The unembedding; for tied checkpoints this is the shared matrix.
    Output,
}

impl EmbeddingSide {
    pub fn as_str(self) -> &'static str {
        match self {
            EmbeddingSide::Input => "input",
            EmbeddingSide::Output => "output",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "input" => Some(EmbeddingSide::Input),
            "output" => Some(EmbeddingSide::Output),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftSeries {
    pub steps: Vec<usize>,
    /// Mean per-token cosine against the first checkpoint.
    pub sim_to_init: Vec<f64>,
    /// Mean per-token cosine against the previous checkpoint; `1` first.
    pub sim_consecutive: Vec<f64>,
}

fn mean_row_cosine(a: &EmbeddingMatrix, b: &EmbeddingMatrix) -> Result<f64> {
    mean_defined(&row_cosines(a, b)).0.ok_or(Error::AllRowsSkipped)
}

/// Drift over an ordered sequence of `(step, matrix)` snapshots.
pub fn drift_from_matrices(snapshots: &[(usize, &EmbeddingMatrix)]) -> Result<DriftSeries> {
    if snapshots.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "drift needs at least 2 checkpoints, got {}",
            snapshots.len()
        )));
    }
    let (_, init) = snapshots[0];
    let mut series = DriftSeries {
        steps: Vec::with_capacity(snapshots.len()),
        sim_to_init: Vec::with_capacity(snapshots.len()),
        sim_consecutive: Vec::with_capacity(snapshots.len()),
    };
    for (i, &(step, m)) in snapshots.iter().enumerate() {
        if m.rows() != init.rows() || m.cols() != init.cols() {
            return Err(Error::Shape(format!(
                "checkpoint at step {step} is {}x{}, initial is {}x{}",
                m.rows(),
                m.cols(),
                init.rows(),
                init.cols()
            )));
        }
        if i > 0 && step <= snapshots[i - 1].0 {
            return Err(Error::InvalidArgument(format!(
                "checkpoint steps must increase ({} then {step})",
                snapshots[i - 1].0
            )));
        }
        series.steps.push(step);
        series.sim_to_init.push(mean_row_cosine(m, init)?);
        series.sim_consecutive.push(if i == 0 {
            1.0
        } else {
            mean_row_cosine(m, snapshots[i - 1].1)?
        });
    }
    Ok(series)
}

pub fn drift_series(checkpoints: &[CheckpointRecord], which: EmbeddingSide) -> Result<DriftSeries> {
    let snaps: Vec<(usize, &EmbeddingMatrix)> = checkpoints
        .iter()
        .map(|c| {
            let m = match which {
                EmbeddingSide::Input => &c.emb_in,
                EmbeddingSide::Output => c.unembedding(),
            };
            (c.step, m)
        })
        .collect();
    drift_from_matrices(&snaps)
}
