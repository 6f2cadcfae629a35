mod common;

use common::spectral::brute_force_spectral_distance;
use nalgebra::DMatrix;
use proptest::prelude::*;
use tiebias_core::embedspace::synthetic::{add_noise, gaussian, random_linear, random_orthogonal};
use tiebias_core::embedspace::*;
use tiebias_core::tensorio::FrequencyTable;

fn from_rows(rows: &[Vec<f64>]) -> EmbeddingMatrix {
    let cols = rows[0].len();
    EmbeddingMatrix::new(rows.len(), cols, rows.concat()).unwrap()
}

fn frob(a: &EmbeddingMatrix, b: &EmbeddingMatrix) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

// ---- alignment -------------------------------------------------------------

#[test]
fn procrustes_in_the_plane_beats_every_closed_form_candidate() {
    // In 2-D the optimal rotation and the optimal reflection have closed
    // forms; the fitted map must do at least as well as the better one.
    let x = gaussian(30, 2, 1);
    let y = gaussian(30, 2, 2);
    let (mut c, mut s, mut cr, mut sr) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..30 {
        let (a, b) = (x.row(i), y.row(i));
        c += a[0] * b[0] + a[1] * b[1];
        s += a[0] * b[1] - a[1] * b[0];
        cr += a[0] * b[0] - a[1] * b[1];
        sr += a[0] * b[1] + a[1] * b[0];
    }
    let apply = |w: [[f64; 2]; 2]| {
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| {
                let r = x.row(i);
                vec![r[0] * w[0][0] + r[1] * w[1][0], r[0] * w[0][1] + r[1] * w[1][1]]
            })
            .collect();
        frob(&from_rows(&rows), &y)
    };
    let t = s.atan2(c);
    let rotation = apply([[t.cos(), t.sin()], [-t.sin(), t.cos()]]);
    let u = sr.atan2(cr);
    let reflection = apply([[u.cos(), u.sin()], [u.sin(), -u.cos()]]);

    let fitted = fit_alignment(&x, &y, AlignmentKind::Orthogonal).unwrap();
    let residual = frob(&fitted.apply(&x).unwrap(), &y);
    assert!(residual <= rotation.min(reflection) + 1e-12, "{residual} vs {rotation}/{reflection}");
    assert!((residual - rotation.min(reflection)).abs() < 1e-9);
}

/// Least squares through the normal equations, solved by Gauss-Jordan.
fn normal_equation_map(x: &EmbeddingMatrix, y: &EmbeddingMatrix) -> Vec<f64> {
    let (n, d, e) = (x.rows(), x.cols(), y.cols());
    let mut aug = vec![vec![0.0; d + e]; d];
    for i in 0..n {
        let (xr, yr) = (x.row(i), y.row(i));
        for r in 0..d {
            for c in 0..d {
                aug[r][c] += xr[r] * xr[c];
            }
            for c in 0..e {
                aug[r][d + c] += xr[r] * yr[c];
            }
        }
    }
    for col in 0..d {
        let p = (col..d).max_by(|&a, &b| aug[a][col].abs().total_cmp(&aug[b][col].abs())).unwrap();
        aug.swap(col, p);
        let pivot = aug[col][col];
        for v in aug[col].iter_mut() {
            *v /= pivot;
        }
        for r in 0..d {
            if r != col {
                let f = aug[r][col];
                let src = aug[col].clone();
                for (v, s) in aug[r].iter_mut().zip(src) {
                    *v -= f * s;
                }
            }
        }
    }
    aug.iter().flat_map(|row| row[d..].to_vec()).collect()
}

#[test]
fn linear_fit_matches_the_normal_equations() {
    let x = gaussian(80, 5, 3);
    let y = gaussian(80, 5, 4);
    let w = fit_alignment(&x, &y, AlignmentKind::Linear).unwrap().map.unwrap();
    let oracle = normal_equation_map(&x, &y);
    for r in 0..5 {
        for c in 0..5 {
            assert!((w[(r, c)] - oracle[r * 5 + c]).abs() < 1e-10);
        }
    }
}

#[test]
fn planted_rotation_is_recovered() {
    let x = gaussian(1000, 64, 10);
    let r = random_orthogonal(64, 11);
    let y = EmbeddingMatrix::from_dmatrix(&(x.to_dmatrix() * &r));
    let fitted = fit_alignment(&x, &y, AlignmentKind::Orthogonal).unwrap();
    assert!((fitted.map.unwrap() - r).norm() < 1e-6);
    let noisy = add_noise(&y, 0.01, 12);
    assert!(alignment_cosine(&x, &noisy, AlignmentKind::Orthogonal).unwrap().mean_cos >= 0.99);
}

#[test]
fn planted_general_map_is_recovered() {
    let x = gaussian(500, 16, 13);
    let m = random_linear(16, 14);
    let y = EmbeddingMatrix::from_dmatrix(&(x.to_dmatrix() * &m));
    let fitted = fit_alignment(&x, &y, AlignmentKind::Linear).unwrap();
    assert!(!fitted.rank_deficient);
    assert!((fitted.map.unwrap() - m).norm() < 1e-6);
}

#[test]
fn unrelated_spaces_have_near_zero_identity_cosine() {
    let rep = alignment_cosine(&gaussian(1000, 32, 20), &gaussian(1000, 32, 21), AlignmentKind::Identity).unwrap();
    // Standard error of the mean is about 1/sqrt(1000 * 32).
    assert!(rep.mean_cos.abs() < 0.05, "{}", rep.mean_cos);
}

// ---- graphs ----------------------------------------------------------------

#[test]
fn unrelated_spaces_share_about_k_over_n_neighbours() {
    let n = 1000;
    let rep = knn_overlap(&gaussian(n, 16, 30), &gaussian(n, 16, 31), 10).unwrap();
    let expected = 10.0 / (n - 1) as f64;
    assert!((rep.overlap - expected).abs() < 0.005, "{}", rep.overlap);
}

#[test]
fn neighbours_of_points_on_a_circle() {
    // Unit vectors at angles 0, 1, ..., n-1 degrees: neighbours are the
    // nearest angles, ties broken toward the lower index.
    let n = 30;
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let t = (i as f64).to_radians();
            vec![t.cos(), t.sin()]
        })
        .collect();
    let m = from_rows(&rows);
    let all: Vec<usize> = (0..n).collect();
    let lists = knn_lists(&m, &all, 2).unwrap();
    assert_eq!(lists[0], vec![1, 2]);
    assert_eq!(lists[10], vec![9, 11]);
    assert_eq!(lists[29], vec![28, 27]);
}

#[test]
fn spectral_distance_matches_a_brute_force_oracle() {
    for seed in 0..5 {
        let a = gaussian(12, 4, 100 + seed);
        let b = gaussian(12, 4, 200 + seed);
        for dim in [12, 4] {
            let got = spectral_distance(&a, &b, 3, dim).unwrap();
            let (want, used) = brute_force_spectral_distance(&a, &b, 3, dim);
            assert_eq!(got.used_dim, used);
            assert!((got.distance - want).abs() < 1e-9, "seed {seed} dim {dim}: {} vs {want}", got.distance);
        }
    }
}

#[test]
fn omnibus_layout() {
    let a1 = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    let a2 = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 0.0]);
    let o = omnibus(&a1, &a2);
    let want = DMatrix::from_row_slice(
        4,
        4,
        &[
            0.0, 1.0, 0.0, 0.5, //
            1.0, 0.0, 0.5, 0.0, //
            0.0, 0.5, 0.0, 0.0, //
            0.5, 0.0, 0.0, 0.0,
        ],
    );
    assert_eq!(o, want);
}

// ---- drift and norm/frequency ----------------------------------------------

#[test]
fn drift_follows_a_planted_rotation_schedule() {
    // Each row of E(t) = cos(θt)·E0 + sin(θt)·P has cosine cos(θt) to E0
    // when P's rows are orthogonal to E0's and of equal norm.
    let e0 = from_rows(&[vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 2.0, 0.0, 0.0]]);
    let p = from_rows(&[vec![0.0, 0.0, 1.0, 0.0], vec![0.0, 0.0, 0.0, 2.0]]);
    let angles = [0.0, 0.1, 0.3, 0.7];
    let snaps: Vec<EmbeddingMatrix> = angles
        .iter()
        .map(|t: &f64| {
            let data = e0.data().iter().zip(p.data()).map(|(a, b)| t.cos() * a + t.sin() * b).collect();
            EmbeddingMatrix::new(2, 4, data).unwrap()
        })
        .collect();
    let pairs: Vec<(usize, &EmbeddingMatrix)> = snaps.iter().enumerate().map(|(i, m)| (i * 10, m)).collect();
    let d = drift_from_matrices(&pairs).unwrap();
    assert_eq!(d.steps, vec![0, 10, 20, 30]);
    for i in 0..4 {
        assert!((d.sim_to_init[i] - f64::cos(angles[i])).abs() < 1e-12);
        let step = if i == 0 { 0.0 } else { angles[i] - angles[i - 1] };
        assert!((d.sim_consecutive[i] - step.cos()).abs() < 1e-12);
    }
}

#[test]
fn norm_tracks_log_frequency_when_planted() {
    // Token i appears 10^(i/10) times (rounded) and has norm log10(count).
    let v = 40;
    let counts: Vec<u64> = (0..v).map(|i| 10f64.powf(i as f64 / 10.0).round() as u64).collect();
    let rows: Vec<Vec<f64>> = counts.iter().map(|&c| vec![(c as f64).log10(), 0.0]).collect();
    let m = from_rows(&rows);
    let freq = FrequencyTable::new(counts.clone());
    let bins = norm_frequency(&m, &freq, 4).unwrap();
    assert_eq!(bins.iter().map(|b| b.count).sum::<usize>(), v);
    for b in &bins {
        let mean = b.mean_norm.unwrap();
        assert!(mean >= b.log10_lo - 1e-12 && mean <= b.log10_hi + 1e-12);
    }
    let means: Vec<f64> = bins.iter().map(|b| b.mean_norm.unwrap()).collect();
    assert!(means.windows(2).all(|w| w[0] < w[1]));
}

// ---- properties ------------------------------------------------------------

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = EmbeddingMatrix> {
    prop::collection::vec(-1.0f64..1.0, rows * cols)
        .prop_filter("no zero rows", move |d| d.chunks(cols).all(|r| r.iter().any(|v| v.abs() > 1e-3)))
        .prop_map(move |d| EmbeddingMatrix::new(rows, cols, d).unwrap())
}

fn permuted(m: &EmbeddingMatrix, perm: &[usize]) -> EmbeddingMatrix {
    m.select_rows(perm)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn cosines_are_bounded(a in matrix(20, 3), b in matrix(20, 3)) {
        for kind in AlignmentKind::ALL {
            let rep = alignment_cosine(&a, &b, kind).unwrap();
            prop_assert!(rep.mean_cos.abs() <= 1.0);
            prop_assert_eq!(rep.skipped_rows, 0);
        }
    }

    #[test]
    fn orthogonal_fit_is_orthogonal(a in matrix(15, 4), b in matrix(15, 4)) {
        let w = fit_alignment(&a, &b, AlignmentKind::Orthogonal).unwrap().map.unwrap();
        prop_assert!((w.transpose() * &w - DMatrix::<f64>::identity(4, 4)).norm() < 1e-9);
    }

    #[test]
    fn vertex_relabelling_leaves_graph_metrics_unchanged(
        a in matrix(14, 3),
        b in matrix(14, 3),
        perm in Just((0..14usize).collect::<Vec<_>>()).prop_shuffle(),
    ) {
        let before = compare_graphs(&a, &b, 3, 6).unwrap();
        let after = compare_graphs(&permuted(&a, &perm), &permuted(&b, &perm), 3, 6).unwrap();
        prop_assert!((before.knn_overlap - after.knn_overlap).abs() < 1e-12);
        prop_assert!((before.spectral_distance - after.spectral_distance).abs() < 1e-7);
    }

    #[test]
    fn overlap_is_symmetric(a in matrix(16, 3), b in matrix(16, 3), k in 1usize..15) {
        let ab = knn_overlap(&a, &b, k).unwrap().overlap;
        let ba = knn_overlap(&b, &a, k).unwrap().overlap;
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&ab));
    }

    #[test]
    fn positive_row_rescaling_does_not_move_neighbours(a in matrix(16, 3), scale in prop::collection::vec(0.1f64..10.0, 16)) {
        let data: Vec<f64> = a.data().chunks(3).zip(&scale).flat_map(|(r, s)| r.iter().map(move |v| v * s)).collect();
        let scaled = EmbeddingMatrix::new(16, 3, data).unwrap();
        prop_assert!((knn_overlap(&a, &scaled, 5).unwrap().overlap - 1.0).abs() < 1e-12);
    }
}
