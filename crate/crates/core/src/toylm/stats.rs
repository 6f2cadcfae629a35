//! Series helpers for gradient traces.

use crate::error::{Error, Result};
use crate::tensorio::TraceLog;

/// Trailing mean over `window` points; the first `window - 1` outputs
/// average whatever prefix is available.
pub fn rolling_average(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::InvalidArgument("window must be at least 1".into()));
    }
    if series.is_empty() {
        return Err(Error::InvalidArgument("empty series".into()));
    }
    let out = (0..series.len())
        .map(|i| {
            let win = &series[(i + 1).saturating_sub(window)..=i];
            win.iter().sum::<f64>() / win.len() as f64
        })
        .collect();
    Ok(out)
}

/// Output-pathway share `g_out / (g_in + g_out)` per trace row.
#[derive(Debug, Clone, PartialEq)]
pub struct PathwayShare {
    /// `(step, share)` for rows with a non-zero total.
    pub shares: Vec<(usize, f64)>,
    /// Steps whose total norm was zero.
    pub skipped_steps: Vec<usize>,
}

impl PathwayShare {
    pub fn values(&self) -> Vec<f64> {
        self.shares.iter().map(|&(_, s)| s).collect()
    }
}

pub fn pathway_share(trace: &TraceLog) -> PathwayShare {
    let mut shares = Vec::with_capacity(trace.len());
    let mut skipped_steps = Vec::new();
    for r in &trace.rows {
        let total = r.grad_in + r.grad_out;
        if total > 0.0 {
            shares.push((r.step, r.grad_out / total));
        } else {
            skipped_steps.push(r.step);
        }
    }
    PathwayShare {
        shares,
        skipped_steps,
    }
}

/// Mean of the rolling output share over the trace rows with
/// `step <= last_step`.
pub fn mean_rolling_share(trace: &TraceLog, window: usize, last_step: usize) -> Result<f64> {
    let share = pathway_share(trace);
    let rolled = rolling_average(&share.values(), window)?;
    let early: Vec<f64> = share
        .shares
        .iter()
        .zip(&rolled)
        .filter(|((step, _), _)| *step <= last_step)
        .map(|(_, &r)| r)
        .collect();
    if early.is_empty() {
        return Err(Error::InvalidArgument(format!("no traced steps at or before {last_step}")));
    }
    Ok(early.iter().sum::<f64>() / early.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensorio::TraceRow;

    #[test]
    fn rolling_window_one_is_identity() {
        let s = [3.0, -1.0, 4.5];
        assert_eq!(rolling_average(&s, 1).unwrap(), s);
    }

    #[test]
    fn rolling_constant_is_unchanged() {
        assert_eq!(rolling_average(&[2.0; 7], 3).unwrap(), [2.0; 7]);
    }

    #[test]
    fn rolling_one_to_ten_window_two() {
        let s: Vec<f64> = (1..=10).map(f64::from).collect();
        let want = [1.0, 1.5, 2.5, 3.5, 4.5, 5.5, 6.5, 7.5, 8.5, 9.5];
        assert_eq!(rolling_average(&s, 2).unwrap(), want);
    }

    #[test]
    fn rolling_errors() {
        assert!(rolling_average(&[], 3).is_err());
        assert!(rolling_average(&[1.0], 0).is_err());
    }

    #[test]
    fn shares() {
        let mut t = TraceLog::new();
        for (step, a, b) in [(1, 1.0, 1.0), (2, 3.0, 7.0), (3, 0.0, 0.0)] {
            t.push(TraceRow { step, grad_in: a, grad_out: b, loss: 0.0 });
        }
        let s = pathway_share(&t);
        assert_eq!(s.shares[0].1, 0.5);
        assert!((s.shares[1].1 - 0.7).abs() < 1e-15);
        assert_eq!(s.skipped_steps, [3]);
    }

    #[test]
    fn early_share_averages_the_rolled_prefix() {
        let mut t = TraceLog::new();
        // Shares 0.5, 0.7, 0.9, 0.1 with a window of 2 roll to
        // 0.5, 0.6, 0.8, 0.5; the first three average to 19/30.
        for (step, a, b) in [(1, 1.0, 1.0), (2, 3.0, 7.0), (3, 1.0, 9.0), (4, 9.0, 1.0)] {
            t.push(TraceRow { step, grad_in: a, grad_out: b, loss: 0.0 });
        }
        let m = mean_rolling_share(&t, 2, 3).unwrap();
        assert!((m - 19.0 / 30.0).abs() < 1e-15);
        assert!(mean_rolling_share(&t, 2, 0).is_err());
    }
}
