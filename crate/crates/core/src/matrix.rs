//! Row-per-token embedding matrices.

use std::collections::HashSet;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Scalar width used when a matrix is persisted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    pub fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Dtype::F32 => "f32",
            Dtype::F64 => "f64",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "f32" => Some(Dtype::F32),
            "f64" => Some(Dtype::F64),
            _ => None,
        }
    }
}

/// Which side of the model a matrix came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Role {
    Input,
    Output,
    Tied,
    #[default]
    Unknown,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Input => "input",
            Role::Output => "output",
            Role::Tied => "tied",
            Role::Unknown => "unknown",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "input" => Some(Role::Input),
            "output" => Some(Role::Output),
            "tied" => Some(Role::Tied),
            "unknown" => Some(Role::Unknown),
            _ => None,
        }
    }
}

/// A `V × d` matrix with one row per token.
///
/// Values are held as `f64` regardless of the on-disk dtype; `dtype` only
/// records the width to use when writing, so an `f32` file round-trips
/// bit-exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    tokens: Option<Vec<String>>,
    pub role: Role,
    pub dtype: Dtype,
}

impl EmbeddingMatrix {
    /// Builds a matrix from row-major data. Entries are not checked for
    /// finiteness here; see [`EmbeddingMatrix::check_finite`].
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self {
            rows,
            cols,
            data,
            tokens: None,
            role: Role::Unknown,
            dtype: Dtype::F64,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(rows, cols, vec![0.0; rows * cols]).expect("shape is consistent")
    }

    pub fn from_dmatrix(m: &DMatrix<f64>) -> Self {
        let (rows, cols) = m.shape();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            data.extend(m.row(r).iter().copied());
        }
        Self::new(rows, cols, data).expect("shape is consistent")
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    /// Attaches token labels. Labels must be unique, one per row, and may
    /// not contain a newline (the on-disk header is newline-delimited).
    pub fn with_tokens(mut self, tokens: Vec<String>) -> Result<Self> {
        validate_tokens(&tokens, self.rows)?;
        self.tokens = Some(tokens);
        Ok(self)
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }

    pub fn with_dtype(mut self, dtype: Dtype) -> Self {
        self.dtype = dtype;
        self
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn tokens(&self) -> Option<&[String]> {
        self.tokens.as_deref()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_norms(&self) -> Vec<f64> {
        (0..self.rows).map(|i| crate::linalg::norm(self.row(i))).collect()
    }

    /// Returns the first non-finite entry, if any.
    pub fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(idx) => Err(Error::NonFinite {
                row: idx / self.cols.max(1),
                col: idx % self.cols.max(1),
            }),
            None => Ok(()),
        }
    }

    /// Copies out the given rows (and their labels) in order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        let tokens = self
            .tokens
            .as_ref()
            .map(|t| indices.iter().map(|&i| t[i].clone()).collect());
        Self {
            rows: indices.len(),
            cols: self.cols,
            data,
            tokens,
            role: self.role,
            dtype: self.dtype,
        }
    }
}

pub(crate) fn validate_tokens(tokens: &[String], rows: usize) -> Result<()> {
    if tokens.len() != rows {
        return Err(Error::Shape(format!(
            "{} tokens for {rows} rows",
            tokens.len()
        )));
    }
    let mut seen = HashSet::with_capacity(tokens.len());
    for t in tokens {
        if t.contains('\n') {
            return Err(Error::InvalidArgument(format!(
                "token {t:?} contains a newline"
            )));
        }
        if !seen.insert(t.as_str()) {
            return Err(Error::InvalidArgument(format!("duplicate token {t:?}")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicate_tokens() {
        let m = EmbeddingMatrix::zeros(2, 1);
        assert!(m.with_tokens(vec!["a".into(), "a".into()]).is_err());
    }

    #[test]
    fn dmatrix_round_trip_keeps_row_major_order() {
        let m = EmbeddingMatrix::new(2, 3, vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let d = m.to_dmatrix();
        assert_eq!(d[(1, 0)], 4.0);
        assert_eq!(EmbeddingMatrix::from_dmatrix(&d), m);
    }

    #[test]
    fn finite_check_reports_position() {
        let m = EmbeddingMatrix::new(2, 2, vec![0., 0., 0., f64::NAN]).unwrap();
        match m.check_finite() {
            Err(Error::NonFinite { row, col }) => assert_eq!((row, col), (1, 1)),
            other => panic!("unexpected {other:?}"),
        }
    }
}
