//! Seeded random matrices for experiments, benches and tests.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::matrix::EmbeddingMatrix;

/// `rows × cols` matrix of independent standard normal entries.
pub fn gaussian(rows: usize, cols: usize, seed: u64) -> EmbeddingMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..rows * cols)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    EmbeddingMatrix::new(rows, cols, data).expect("shape is consistent")
}

/// Adds `sigma`-scaled Gaussian noise to every entry.
pub fn add_noise(m: &EmbeddingMatrix, sigma: f64, seed: u64) -> EmbeddingMatrix {
    let noise = gaussian(m.rows(), m.cols(), seed);
    let data = m
        .data()
        .iter()
        .zip(noise.data())
        .map(|(a, n)| a + sigma * n)
        .collect();
    EmbeddingMatrix::new(m.rows(), m.cols(), data).expect("shape is consistent")
}

/// Haar-ish random orthogonal matrix: QR of a Gaussian matrix with the
/// signs of `R`'s diagonal folded into `Q`.
pub fn random_orthogonal(d: usize, seed: u64) -> DMatrix<f64> {
    let g = gaussian(d, d, seed).to_dmatrix();
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Random general `d × d` map with entries drawn from `N(0, 1/d)`.
pub fn random_linear(d: usize, seed: u64) -> DMatrix<f64> {
    gaussian(d, d, seed).to_dmatrix() / (d as f64).sqrt()
}
