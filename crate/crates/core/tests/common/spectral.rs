//! Dense reference computations for the graph metrics.

use tiebias_core::EmbeddingMatrix;

/// Cyclic Jacobi eigenvalue iteration for a dense symmetric matrix.
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut a = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(i == j)).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j].powi(2)).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

/// Spectral distance from first principles: brute-force kNN, omnibus,
/// Jacobi eigenpairs, and the largest singular value via a second Jacobi
/// run on `DᵀD`.
pub fn brute_force_spectral_distance(a: &EmbeddingMatrix, b: &EmbeddingMatrix, k: usize, dim: usize) -> (f64, usize) {
    let n = a.rows();
    let graph = |m: &EmbeddingMatrix| {
        let mut adj = vec![vec![0.0; n]; n];
        for i in 0..n {
            let mut sims: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let (x, y) = (m.row(i), m.row(j));
                    let dot: f64 = x.iter().zip(y).map(|(p, q)| p * q).sum();
                    let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
                    (dot / (nx * ny), j)
                })
                .collect();
            sims.sort_by(|p, q| q.0.total_cmp(&p.0).then(p.1.cmp(&q.1)));
            for &(_, j) in &sims[..k] {
                adj[i][j] = 1.0;
                adj[j][i] = 1.0;
            }
        }
        adj
    };
    let (g1, g2) = (graph(a), graph(b));
    let mut omni = vec![vec![0.0; 2 * n]; 2 * n];
    for i in 0..n {
        for j in 0..n {
            let mean = (g1[i][j] + g2[i][j]) / 2.0;
            omni[i][j] = g1[i][j];
            omni[n + i][n + j] = g2[i][j];
            omni[i][n + j] = mean;
            omni[n + i][j] = mean;
        }
    }
    let (vals, vecs) = jacobi_eigen(&omni);
    let radius = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut order: Vec<usize> = (0..2 * n).filter(|&i| vals[i] > 1e-10 * radius).collect();
    order.sort_by(|&i, &j| vals[j].total_cmp(&vals[i]));
    order.truncate(dim);
    let diff: Vec<Vec<f64>> = (0..n)
        .map(|r| order.iter().map(|&c| (vecs[r][c] - vecs[n + r][c]) * vals[c].sqrt()).collect())
        .collect();
    let e = order.len();
    let gram: Vec<Vec<f64>> = (0..e)
        .map(|p| (0..e).map(|q| (0..n).map(|r| diff[r][p] * diff[r][q]).sum()).collect())
        .collect();
    let top = if e == 0 { 0.0 } else { jacobi_eigen(&gram).0.into_iter().fold(0.0f64, f64::max) };
    (top.max(0.0).sqrt(), e)
}
