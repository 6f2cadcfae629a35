//! Embedding norm as a function of token frequency.

use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::matrix::EmbeddingMatrix;
use crate::tensorio::FrequencyTable;

pub const DEFAULT_BINS: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct NormFrequencyBin {
    pub log10_lo: f64,
    pub log10_hi: f64,
    pub count: usize,
    /// `None` for empty bins.
    pub mean_norm: Option<f64>,
}

impl NormFrequencyBin {
    pub fn center(&self) -> f64 {
        0.5 * (self.log10_lo + self.log10_hi)
    }
}

/// Per-token `(log10 frequency, L2 norm)` for tokens seen at least once.
pub fn norm_frequency_points(m: &EmbeddingMatrix, freq: &FrequencyTable) -> Vec<(usize, f64, f64)> {
    (0..m.rows().min(freq.vocab()))
        .filter(|&i| freq.count(i) > 0)
        .map(|i| (i, (freq.count(i) as f64).log10(), norm(m.row(i))))
        .collect()
}

/// Mean row norm in equal-width bins of log10 frequency spanning the
/// observed range. Tokens with zero count are left out.
pub fn norm_frequency(
    m: &EmbeddingMatrix,
    freq: &FrequencyTable,
    bins: usize,
) -> Result<Vec<NormFrequencyBin>> {
    if bins == 0 {
        return Err(Error::InvalidArgument("bins must be at least 1".into()));
    }
    let points = norm_frequency_points(m, freq);
    if points.is_empty() {
        return Err(Error::InvalidArgument(
            "no token of the matrix has a non-zero frequency".into(),
        ));
    }
    let lo = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;

    let mut sums = vec![0.0; bins];
    let mut counts = vec![0usize; bins];
    for &(_, lf, n) in &points {
        let b = if width > 0.0 {
            (((lf - lo) / width) as usize).min(bins - 1)
        } else {
            0
        };
        sums[b] += n;
        counts[b] += 1;
    }
    Ok((0..bins)
        .map(|b| NormFrequencyBin {
            log10_lo: lo + b as f64 * width,
            log10_hi: if b + 1 == bins { hi } else { lo + (b + 1) as f64 * width },
            count: counts[b],
            mean_norm: (counts[b] > 0).then(|| sums[b] / counts[b] as f64),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_rows_give_unit_means() {
        let mut data = Vec::new();
        for i in 0..8 {
            let a = i as f64;
            data.extend_from_slice(&[a.cos(), a.sin()]);
        }
        let m = EmbeddingMatrix::new(8, 2, data).unwrap();
        let f = FrequencyTable::new(vec![1, 10, 100, 3, 0, 7, 5000, 2]);
        let bins = norm_frequency(&m, &f, 4).unwrap();
        assert_eq!(bins.iter().map(|b| b.count).sum::<usize>(), 7);
        for b in bins.iter().filter(|b| b.count > 0) {
            assert!((b.mean_norm.unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn all_zero_frequencies_is_an_error() {
        let m = EmbeddingMatrix::zeros(3, 1);
        assert!(norm_frequency(&m, &FrequencyTable::new(vec![0, 0, 0]), 5).is_err());
    }

    #[test]
    fn single_distinct_frequency_lands_in_first_bin() {
        let m = EmbeddingMatrix::new(2, 1, vec![2.0, 4.0]).unwrap();
        let bins = norm_frequency(&m, &FrequencyTable::new(vec![10, 10]), 3).unwrap();
        assert_eq!(bins[0].count, 2);
        assert_eq!(bins[0].mean_norm, Some(3.0));
    }
}
