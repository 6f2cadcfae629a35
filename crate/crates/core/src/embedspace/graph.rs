//! Exact k-nearest-neighbour graphs, neighbour overlap, and the omnibus
//! spectral distance between two graphs over the same vertex set.

use std::cmp::Ordering;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg::{gemm_bt, norm};
use crate::matrix::EmbeddingMatrix;

pub const DEFAULT_K: usize = 10;
pub const DEFAULT_EMBED_DIM: usize = 16;

/// Eigenvalues at or below this fraction of the spectral radius count as
/// non-positive and are left out of the embedding.
const POSITIVE_EIGEN_TOL: f64 = 1e-10;

const BLOCK_ROWS: usize = 128;

/// Indices of rows with non-zero norm in both matrices.
fn shared_nonzero_rows(a: &EmbeddingMatrix, b: &EmbeddingMatrix) -> Result<Vec<usize>> {
    if a.rows() != b.rows() {
        return Err(Error::Shape(format!(
            "{} rows vs {} rows",
            a.rows(),
            b.rows()
        )));
    }
    a.check_finite()?;
    b.check_finite()?;
    Ok((0..a.rows())
        .filter(|&i| norm(a.row(i)) > 0.0 && norm(b.row(i)) > 0.0)
        .collect())
}

fn unit_rows(m: &EmbeddingMatrix, rows: &[usize]) -> Vec<f64> {
    let d = m.cols();
    let mut out = Vec::with_capacity(rows.len() * d);
    for &i in rows {
        let r = m.row(i);
        let n = norm(r);
        out.extend(r.iter().map(|v| v / n));
    }
    out
}

/// Neighbour ranking: higher similarity first, then lower index.
fn rank(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    b.0.partial_cmp(&a.0)
        .unwrap_or(Ordering::Equal)
        .then(a.1.cmp(&b.1))
}

/// The `k` most cosine-similar rows of each listed row, self excluded.
///
/// Returned neighbour ids are positions within `rows`, sorted by rank.
pub fn knn_lists(m: &EmbeddingMatrix, rows: &[usize], k: usize) -> Result<Vec<Vec<usize>>> {
    let n = rows.len();
    if k == 0 || k >= n {
        return Err(Error::InvalidArgument(format!(
            "k = {k} must be in 1..{n} (number of usable rows)"
        )));
    }
    let d = m.cols();
    let unit = unit_rows(m, rows);
    let mut lists = Vec::with_capacity(n);
    let mut sims = vec![0.0; BLOCK_ROWS * n];
    let mut cand: Vec<(f64, usize)> = Vec::with_capacity(n);
    for start in (0..n).step_by(BLOCK_ROWS) {
        let end = (start + BLOCK_ROWS).min(n);
        let bn = end - start;
        let block = &mut sims[..bn * n];
        gemm_bt(&unit[start * d..end * d], &unit, block, bn, d, n, 0.0);
        for bi in 0..bn {
            let i = start + bi;
            cand.clear();
            cand.extend(
                block[bi * n..(bi + 1) * n]
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(j, &s)| (s, j)),
            );
            cand.select_nth_unstable_by(k - 1, rank);
            cand.truncate(k);
            cand.sort_unstable_by(rank);
            lists.push(cand.iter().map(|&(_, j)| j).collect());
        }
    }
    Ok(lists)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnOverlap {
    pub overlap: f64,
    pub k: usize,
    /// Rows left out because they had zero norm in either matrix.
    pub skipped: usize,
    /// Shared fraction per row of the inputs; `None` for skipped rows.
    pub per_token: Vec<Option<f64>>,
}

/// Mean fraction of shared `k`-nearest neighbours per token.
///
/// The two matrices must have the same rows but may differ in width.
pub fn knn_overlap(a: &EmbeddingMatrix, b: &EmbeddingMatrix, k: usize) -> Result<KnnOverlap> {
    let rows = shared_nonzero_rows(a, b)?;
    let la = knn_lists(a, &rows, k)?;
    let lb = knn_lists(b, &rows, k)?;
    let mut mark = vec![usize::MAX; rows.len()];
    let mut total = 0.0;
    let mut per_token = vec![None; a.rows()];
    for (i, (na, nb)) in la.iter().zip(&lb).enumerate() {
        for &j in na {
            mark[j] = i;
        }
        let shared = nb.iter().filter(|&&j| mark[j] == i).count() as f64 / k as f64;
        per_token[rows[i]] = Some(shared);
        total += shared;
    }
    Ok(KnnOverlap {
        overlap: total / rows.len() as f64,
        k,
        skipped: a.rows() - rows.len(),
        per_token,
    })
}

/// Symmetric binary adjacency: `i ~ j` when either lists the other.
pub fn knn_adjacency(lists: &[Vec<usize>]) -> DMatrix<f64> {
    let n = lists.len();
    let mut adj = DMatrix::zeros(n, n);
    for (i, l) in lists.iter().enumerate() {
        for &j in l {
            adj[(i, j)] = 1.0;
            adj[(j, i)] = 1.0;
        }
    }
    adj
}

/// `[[A₁, (A₁+A₂)/2], [(A₁+A₂)/2, A₂]]`.
pub fn omnibus(a1: &DMatrix<f64>, a2: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a1.nrows();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    let mean = (a1 + a2) * 0.5;
    m.view_mut((0, 0), (n, n)).copy_from(a1);
    m.view_mut((n, n), (n, n)).copy_from(a2);
    m.view_mut((0, n), (n, n)).copy_from(&mean);
    m.view_mut((n, 0), (n, n)).copy_from(&mean);
    m
}

/// Adjacency spectral embedding of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SpectralEmbedding {
    /// `n × dim`, eigenvectors scaled by `√λ`.
    pub coords: DMatrix<f64>,
    /// Eigenvalues used, descending.
    pub eigenvalues: Vec<f64>,
    pub requested_dim: usize,
}

impl SpectralEmbedding {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn reduced(&self) -> bool {
        self.dim() < self.requested_dim
    }
}

/// Top `dim` positive eigenpairs, largest first.
pub fn adjacency_spectral_embedding(m: &DMatrix<f64>, dim: usize) -> Result<SpectralEmbedding> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::Shape("adjacency must be square".into()));
    }
    if dim == 0 || dim > n {
        return Err(Error::InvalidArgument(format!(
            "embedding dimension {dim} must be in 1..={n}"
        )));
    }
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::Numeric("symmetric eigensolver did not converge".into()))?;
    let radius = eig.eigenvalues.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let mut order: Vec<usize> = (0..n)
        .filter(|&i| eig.eigenvalues[i] > POSITIVE_EIGEN_TOL * radius)
        .collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(Ordering::Equal)
            .then(i.cmp(&j))
    });
    order.truncate(dim);
    let mut coords = DMatrix::zeros(n, order.len());
    let mut eigenvalues = Vec::with_capacity(order.len());
    for (c, &i) in order.iter().enumerate() {
        let lambda = eig.eigenvalues[i];
        coords
            .column_mut(c)
            .copy_from(&(eig.eigenvectors.column(i) * lambda.sqrt()));
        eigenvalues.push(lambda);
    }
    Ok(SpectralEmbedding {
        coords,
        eigenvalues,
        requested_dim: dim,
    })
}

/// Largest singular value.
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDistance {
    pub distance: f64,
    pub requested_dim: usize,
    pub used_dim: usize,
}

impl SpectralDistance {
    pub fn reduced(&self) -> bool {
        self.used_dim < self.requested_dim
    }
}

/// Operator-norm distance between the two halves of the omnibus embedding
/// of two adjacency matrices over the same vertices.
pub fn spectral_distance_from_graphs(
    a1: &DMatrix<f64>,
    a2: &DMatrix<f64>,
    embed_dim: usize,
) -> Result<SpectralDistance> {
    if a1.shape() != a2.shape() || a1.nrows() != a1.ncols() {
        return Err(Error::Shape("graphs must be square and the same size".into()));
    }
    let n = a1.nrows();
    let emb = adjacency_spectral_embedding(&omnibus(a1, a2), embed_dim)?;
    let e = emb.dim();
    let diff = emb.coords.rows(0, n) - emb.coords.rows(n, n);
    Ok(SpectralDistance {
        distance: operator_norm(&diff.view((0, 0), (n, e)).into_owned()),
        requested_dim: embed_dim,
        used_dim: e,
    })
}

/// Builds union-symmetrised cosine `k`-NN graphs of both matrices and
/// returns their omnibus spectral distance.
pub fn spectral_distance(
    a: &EmbeddingMatrix,
    b: &EmbeddingMatrix,
    k: usize,
    embed_dim: usize,
) -> Result<SpectralDistance> {
    let rows = shared_nonzero_rows(a, b)?;
    if embed_dim > rows.len() {
        return Err(Error::InvalidArgument(format!(
            "embed_dim {embed_dim} exceeds the {} usable rows",
            rows.len()
        )));
    }
    let g1 = knn_adjacency(&knn_lists(a, &rows, k)?);
    let g2 = knn_adjacency(&knn_lists(b, &rows, k)?);
    spectral_distance_from_graphs(&g1, &g2, embed_dim)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphCompareReport {
    pub knn_overlap: f64,
    pub spectral_distance: f64,
    pub k: usize,
    pub embed_dim: usize,
    pub used_dim: usize,
    pub skipped: usize,
}

pub fn compare_graphs(
    a: &EmbeddingMatrix,
    b: &EmbeddingMatrix,
    k: usize,
    embed_dim: usize,
) -> Result<GraphCompareReport> {
    let ov = knn_overlap(a, b, k)?;
    let sd = spectral_distance(a, b, k, embed_dim)?;
    Ok(GraphCompareReport {
        knn_overlap: ov.overlap,
        spectral_distance: sd.distance,
        k,
        embed_dim,
        used_dim: sd.used_dim,
        skipped: ov.skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedspace::synthetic::gaussian;

    #[test]
    fn knn_brute_force_agrees() {
        let m = gaussian(30, 4, 1);
        let rows: Vec<usize> = (0..30).collect();
        let lists = knn_lists(&m, &rows, 5).unwrap();
        for i in 0..30 {
            let mut all: Vec<(f64, usize)> = (0..30)
                .filter(|&j| j != i)
                .map(|j| (crate::linalg::cosine(m.row(i), m.row(j)).unwrap(), j))
                .collect();
            all.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
            let want: Vec<usize> = all[..5].iter().map(|x| x.1).collect();
            assert_eq!(lists[i], want);
        }
    }

    #[test]
    fn ties_break_by_ascending_index() {
        // Rows 1..=3 are identical, so row 0 sees a three-way tie.
        let m = EmbeddingMatrix::new(5, 2, vec![1., 0., 0., 1., 0., 1., 0., 1., -1., 0.]).unwrap();
        let rows: Vec<usize> = (0..5).collect();
        let lists = knn_lists(&m, &rows, 2).unwrap();
        assert_eq!(lists[0], [1, 2]);
        assert_eq!(lists[2], [1, 3]);
    }

    #[test]
    fn overlap_of_identical_spaces_is_one() {
        let m = gaussian(50, 6, 2);
        assert_eq!(knn_overlap(&m, &m, 10).unwrap().overlap, 1.0);
    }

    #[test]
    fn overlap_is_symmetric_and_allows_different_widths() {
        let a = gaussian(60, 5, 3);
        let b = gaussian(60, 9, 4);
        let ab = knn_overlap(&a, &b, 7).unwrap().overlap;
        let ba = knn_overlap(&b, &a, 7).unwrap().overlap;
        assert_eq!(ab, ba);
        assert!((0.0..=1.0).contains(&ab));
    }

    #[test]
    fn k_must_be_below_vocabulary() {
        let m = gaussian(10, 3, 5);
        assert!(knn_overlap(&m, &m, 10).is_err());
        assert!(knn_overlap(&m, &m, 0).is_err());
    }

    #[test]
    fn zero_rows_are_counted() {
        let mut m = gaussian(20, 3, 6);
        m.data_mut()[3..6].fill(0.0);
        let r = knn_overlap(&m, &m, 3).unwrap();
        assert_eq!(r.skipped, 1);
    }

    #[test]
    fn spectral_distance_of_identical_spaces_is_zero() {
        let m = gaussian(40, 4, 7);
        let d = spectral_distance(&m, &m, 5, 8).unwrap();
        assert!(d.distance < 1e-9, "{}", d.distance);
    }

    #[test]
    fn spectral_distance_is_symmetric() {
        let a = gaussian(40, 4, 8);
        let b = gaussian(40, 4, 9);
        let ab = spectral_distance(&a, &b, 5, 4).unwrap().distance;
        let ba = spectral_distance(&b, &a, 5, 4).unwrap().distance;
        assert!(ab > 0.0);
        assert!((ab - ba).abs() < 1e-8 * ab.max(1.0), "{ab} vs {ba}");
    }

    #[test]
    fn embedding_dim_reduces_when_too_few_positive_eigenvalues() {
        // Single edge: omnibus of two copies has exactly one positive eigenvalue.
        let mut a = DMatrix::zeros(3, 3);
        a[(0, 1)] = 1.0;
        a[(1, 0)] = 1.0;
        let d = spectral_distance_from_graphs(&a, &a, 3).unwrap();
        assert_eq!(d.used_dim, 1);
        assert!(d.reduced());
        assert!(d.distance < 1e-12);
    }
}
