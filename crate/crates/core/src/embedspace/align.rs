//! Alignment transforms between embedding spaces and per-token cosine.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::cosine;
use crate::matrix::EmbeddingMatrix;

/// Singular values below this fraction of the largest are treated as zero.
pub const RANK_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlignmentKind {
    Identity,
    Orthogonal,
    Linear,
}

impl AlignmentKind {
    pub const ALL: [AlignmentKind; 3] = [
        AlignmentKind::Identity,
        AlignmentKind::Orthogonal,
        AlignmentKind::Linear,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AlignmentKind::Identity => "identity",
            AlignmentKind::Orthogonal => "orthogonal",
            AlignmentKind::Linear => "linear",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

/// A fitted map `x ↦ x · W` from source rows into the target space.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentTransform {
    pub kind: AlignmentKind,
    /// `d × d`; `None` for the identity.
    pub map: Option<DMatrix<f64>>,
    /// Set when the least-squares source matrix lost rank at the cutoff.
    pub rank_deficient: bool,
}

impl AlignmentTransform {
    pub fn identity() -> Self {
        Self {
            kind: AlignmentKind::Identity,
            map: None,
            rank_deficient: false,
        }
    }

    pub fn apply(&self, src: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
        let Some(w) = &self.map else {
            return Ok(src.clone());
        };
        if w.nrows() != src.cols() {
            return Err(Error::Shape(format!(
                "map expects {} columns, matrix has {}",
                w.nrows(),
                src.cols()
            )));
        }
        let mapped = src.to_dmatrix() * w;
        let mut out = EmbeddingMatrix::from_dmatrix(&mapped).with_role(src.role);
        if let Some(t) = src.tokens() {
            out = out.with_tokens(t.to_vec())?;
        }
        Ok(out)
    }
}

fn check_pair(src: &EmbeddingMatrix, dst: &EmbeddingMatrix) -> Result<()> {
    if src.rows() != dst.rows() || src.cols() != dst.cols() {
        return Err(Error::Shape(format!(
            "source is {}x{}, target is {}x{}",
            src.rows(),
            src.cols(),
            dst.rows(),
            dst.cols()
        )));
    }
    if src.cols() == 0 {
        return Err(Error::Shape("embedding dimension must be at least 1".into()));
    }
    src.check_finite()?;
    dst.check_finite()
}

/// Fits `W` so that `src · W` approximates `dst`.
///
/// * orthogonal: `W = U Vᵀ` from the SVD of `srcᵀ dst` (reflections allowed);
/// * linear: `W = src⁺ dst` with an SVD pseudoinverse.
///
/// Neither side is centred or normalised.
pub fn fit_alignment(
    src: &EmbeddingMatrix,
    dst: &EmbeddingMatrix,
    kind: AlignmentKind,
) -> Result<AlignmentTransform> {
    check_pair(src, dst)?;
    match kind {
        AlignmentKind::Identity => Ok(AlignmentTransform::identity()),
        AlignmentKind::Orthogonal => {
            let cross = src.to_dmatrix().transpose() * dst.to_dmatrix();
            let svd = cross
                .try_svd(true, true, f64::EPSILON, 0)
                .ok_or_else(|| Error::Numeric("SVD did not converge".into()))?;
            let u = svd.u.expect("requested");
            let v_t = svd.v_t.expect("requested");
            Ok(AlignmentTransform {
                kind,
                map: Some(u * v_t),
                rank_deficient: false,
            })
        }
        AlignmentKind::Linear => {
            if src.rows() < src.cols() {
                return Err(Error::InvalidArgument(format!(
                    "linear alignment needs at least as many rows ({}) as columns ({})",
                    src.rows(),
                    src.cols()
                )));
            }
            let (pinv, rank_deficient) = pseudoinverse(&src.to_dmatrix())?;
            Ok(AlignmentTransform {
                kind,
                map: Some(pinv * dst.to_dmatrix()),
                rank_deficient,
            })
        }
    }
}

/// Moore-Penrose pseudoinverse via thin SVD; also reports whether any
/// singular value fell under the cutoff.
pub fn pseudoinverse(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, bool)> {
    let svd = a
        .clone()
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numeric("SVD did not converge".into()))?;
    let u = svd.u.expect("requested");
    let v_t = svd.v_t.expect("requested");
    let s = svd.singular_values;
    let s_max = s.iter().copied().fold(0.0, f64::max);
    let cutoff = RANK_CUTOFF * s_max;
    let mut deficient = false;
    // V Σ⁺ Uᵀ
    let mut v_scaled = v_t.transpose();
    for (j, &sv) in s.iter().enumerate() {
        let inv = if sv > cutoff {
            1.0 / sv
        } else {
            deficient = true;
            0.0
        };
        v_scaled.column_mut(j).scale_mut(inv);
    }
    Ok((v_scaled * u.transpose(), deficient))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentReport {
    pub kind: AlignmentKind,
    pub mean_cos: f64,
    /// One entry per token; `None` where either row had zero norm.
    pub per_token_cos: Vec<Option<f64>>,
    pub skipped_rows: usize,
    pub rank_deficient: bool,
}

/// Per-token cosine between rows of two equally shaped matrices.
pub fn row_cosines(a: &EmbeddingMatrix, b: &EmbeddingMatrix) -> Vec<Option<f64>> {
    debug_assert_eq!(a.rows(), b.rows());
    (0..a.rows()).map(|i| cosine(a.row(i), b.row(i))).collect()
}

/// Mean of the defined entries, with the count of undefined ones.
pub fn mean_defined(values: &[Option<f64>]) -> (Option<f64>, usize) {
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in values.iter().flatten() {
        sum += v;
        n += 1;
    }
    let skipped = values.len() - n;
    ((n > 0).then(|| sum / n as f64), skipped)
}

/// Fits `kind` from `src` to `dst`, maps `src`, and scores every row by
/// cosine against the matching `dst` row.
pub fn alignment_cosine(
    src: &EmbeddingMatrix,
    dst: &EmbeddingMatrix,
    kind: AlignmentKind,
) -> Result<AlignmentReport> {
    let transform = fit_alignment(src, dst, kind)?;
    let mapped = transform.apply(src)?;
    let per_token_cos = row_cosines(&mapped, dst);
    let (mean, skipped_rows) = mean_defined(&per_token_cos);
    Ok(AlignmentReport {
        kind,
        mean_cos: mean.ok_or(Error::AllRowsSkipped)?,
        per_token_cos,
        skipped_rows,
        rank_deficient: transform.rank_deficient,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedspace::synthetic::{gaussian, random_orthogonal};

    #[test]
    fn self_alignment_is_perfect_for_every_kind() {
        let x = gaussian(50, 6, 1);
        for kind in AlignmentKind::ALL {
            let rep = alignment_cosine(&x, &x, kind).unwrap();
            assert!((rep.mean_cos - 1.0).abs() < 1e-9, "{kind:?}: {}", rep.mean_cos);
        }
        let t = fit_alignment(&x, &x, AlignmentKind::Orthogonal).unwrap();
        let w = t.map.unwrap();
        let gram = w.transpose() * &w;
        assert!((gram - DMatrix::identity(6, 6)).norm() < 1e-9);
    }

    #[test]
    fn orthogonal_map_preserves_row_norms() {
        let x = gaussian(40, 5, 2);
        let y = gaussian(40, 5, 3);
        let t = fit_alignment(&x, &y, AlignmentKind::Orthogonal).unwrap();
        let mapped = t.apply(&x).unwrap();
        for (a, b) in x.row_norms().iter().zip(mapped.row_norms()) {
            assert!((a - b).abs() <= 1e-9 * a);
        }
    }

    #[test]
    fn reflections_are_allowed() {
        let x = gaussian(30, 3, 4);
        let mut flip = DMatrix::identity(3, 3);
        flip[(0, 0)] = -1.0;
        let y = EmbeddingMatrix::from_dmatrix(&(x.to_dmatrix() * &flip));
        let t = fit_alignment(&x, &y, AlignmentKind::Orthogonal).unwrap();
        assert!((t.map.unwrap() - flip).norm() < 1e-10);
    }

    #[test]
    fn zero_rows_are_skipped_and_counted() {
        let mut x = gaussian(10, 3, 5);
        x.data_mut()[..3].fill(0.0);
        let rep = alignment_cosine(&x, &x, AlignmentKind::Identity).unwrap();
        assert_eq!(rep.skipped_rows, 1);
        assert!(rep.per_token_cos[0].is_none());
        assert_eq!(rep.mean_cos, 1.0);

        let z = EmbeddingMatrix::zeros(4, 2);
        assert!(matches!(
            alignment_cosine(&z, &z, AlignmentKind::Identity),
            Err(Error::AllRowsSkipped)
        ));
    }

    #[test]
    fn rank_deficiency_is_flagged() {
        // Third column duplicates the first.
        let base = gaussian(20, 2, 6);
        let mut data = Vec::new();
        for i in 0..20 {
            let r = base.row(i);
            data.extend_from_slice(&[r[0], r[1], r[0]]);
        }
        let x = EmbeddingMatrix::new(20, 3, data).unwrap();
        let t = fit_alignment(&x, &x, AlignmentKind::Linear).unwrap();
        assert!(t.rank_deficient);
        let rep = alignment_cosine(&x, &x, AlignmentKind::Linear).unwrap();
        assert!((rep.mean_cos - 1.0).abs() < 1e-9);
    }

    #[test]
    fn shape_errors() {
        let a = gaussian(5, 3, 1);
        let b = gaussian(6, 3, 1);
        assert!(matches!(fit_alignment(&a, &b, AlignmentKind::Identity), Err(Error::Shape(_))));
        let wide = gaussian(2, 3, 1);
        assert!(fit_alignment(&wide, &wide, AlignmentKind::Linear).is_err());
        assert!(fit_alignment(&wide, &wide, AlignmentKind::Orthogonal).is_ok());
    }

    #[test]
    fn planted_rotation_small() {
        let x = gaussian(100, 8, 9);
        let r = random_orthogonal(8, 10);
        let y = EmbeddingMatrix::from_dmatrix(&(x.to_dmatrix() * &r));
        let t = fit_alignment(&x, &y, AlignmentKind::Orthogonal).unwrap();
        assert!((t.map.unwrap() - r).norm() < 1e-9);
    }
}
