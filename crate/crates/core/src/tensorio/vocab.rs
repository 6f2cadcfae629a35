use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::matrix::EmbeddingMatrix;

/// Restricts two labelled matrices to their shared token strings.
///
/// Rows of both outputs follow the byte-lexicographic order of the shared
/// tokens, so the result does not depend on argument order.
pub fn intersect_vocabularies(
    a: &EmbeddingMatrix,
    b: &EmbeddingMatrix,
) -> Result<(EmbeddingMatrix, EmbeddingMatrix)> {
    let ta = a
        .tokens()
        .ok_or_else(|| Error::MissingTokens("first matrix has no token list".into()))?;
    let tb = b
        .tokens()
        .ok_or_else(|| Error::MissingTokens("second matrix has no token list".into()))?;

    let index_b: HashMap<&str, usize> = tb.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    let mut shared: Vec<(&str, usize, usize)> = ta
        .iter()
        .enumerate()
        .filter_map(|(i, t)| index_b.get(t.as_str()).map(|&j| (t.as_str(), i, j)))
        .collect();
    if shared.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    shared.sort_unstable_by(|x, y| x.0.as_bytes().cmp(y.0.as_bytes()));

    let rows_a: Vec<usize> = shared.iter().map(|s| s.1).collect();
    let rows_b: Vec<usize> = shared.iter().map(|s| s.2).collect();
    Ok((a.select_rows(&rows_a), b.select_rows(&rows_b)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labelled(tokens: &[&str]) -> EmbeddingMatrix {
        let data = (0..tokens.len() * 2).map(|i| i as f64).collect();
        EmbeddingMatrix::new(tokens.len(), 2, data)
            .unwrap()
            .with_tokens(tokens.iter().map(|s| s.to_string()).collect())
            .unwrap()
    }

    #[test]
    fn identical_lists_return_whole_matrices() {
        let a = labelled(&["a", "b", "c"]);
        let (x, y) = intersect_vocabularies(&a, &a).unwrap();
        assert_eq!(x, a);
        assert_eq!(y, a);
    }

    #[test]
    fn partial_overlap() {
        let a = labelled(&["a", "b", "c"]);
        let b = labelled(&["d", "c", "b"]);
        let (x, y) = intersect_vocabularies(&a, &b).unwrap();
        assert_eq!(x.tokens().unwrap(), ["b", "c"]);
        assert_eq!(y.tokens().unwrap(), ["b", "c"]);
        assert_eq!(x.row(0), a.row(1));
        assert_eq!(y.row(0), b.row(2));
    }

    #[test]
    fn errors() {
        let a = labelled(&["a"]);
        let b = labelled(&["b"]);
        assert!(matches!(intersect_vocabularies(&a, &b), Err(Error::EmptyIntersection)));
        let bare = EmbeddingMatrix::zeros(1, 2);
        assert!(matches!(intersect_vocabularies(&a, &bare), Err(Error::MissingTokens(_))));
    }

    proptest! {
        #[test]
        fn symmetric_in_content(
            xs in proptest::collection::hash_set("[a-e]{1,2}", 1..10),
            ys in proptest::collection::hash_set("[a-e]{1,2}", 1..10),
        ) {
            let xs: Vec<&str> = xs.iter().map(String::as_str).collect();
            let ys: Vec<&str> = ys.iter().map(String::as_str).collect();
            let a = labelled(&xs);
            let b = labelled(&ys);
            match (intersect_vocabularies(&a, &b), intersect_vocabularies(&b, &a)) {
                (Ok((a1, b1)), Ok((b2, a2))) => {
                    prop_assert_eq!(a1.tokens(), b2.tokens());
                    prop_assert_eq!(a1, a2);
                    prop_assert_eq!(b1, b2);
                }
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "asymmetric failure"),
            }
        }
    }
}
