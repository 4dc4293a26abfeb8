//! Exact brute-force nearest neighbours, used to borrow destination votes.

use std::cmp::Ordering;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn sq_dist<T: Scalar>(a: ArrayView1<'_, T>, b: ArrayView1<'_, T>) -> T {
    a.iter().zip(b).map(|(x, y)| (*x - *y) * (*x - *y)).sum()
}

/// `(distance, index)` ordering; ties on distance go to the lower index.
fn closer<T: Scalar>(a: (T, usize), b: (T, usize)) -> Ordering {
    a.0.partial_cmp(&b.0)
        .unwrap_or(Ordering::Equal)
        .then(a.1.cmp(&b.1))
}

/// Indices of the `k` nearest destination rows for every source row, nearest
/// first. O(n_src * n_dst * d); rows are processed in parallel and the result
/// does not depend on the thread count.
pub fn nearest_neighbors<T: Scalar>(
    src: ArrayView2<'_, T>,
    dst: ArrayView2<'_, T>,
    k: usize,
) -> Result<Vec<Vec<usize>>> {
    if dst.nrows() == 0 {
        return Err(Error::EmptyDestination);
    }
    if k == 0 || k > dst.nrows() {
        return Err(Error::InvalidParameter(format!(
            "k must lie in 1..={}, got {k}",
            dst.nrows()
        )));
    }
    if src.ncols() != dst.ncols() {
        return Err(Error::DimensionMismatch {
            context: "knn feature dims",
            expected: dst.ncols(),
            found: src.ncols(),
        });
    }
    let out = (0..src.nrows())
        .into_par_iter()
        .map(|i| {
            let q = src.row(i);
            let mut best: Vec<(T, usize)> = Vec::with_capacity(k + 1);
            for (j, p) in dst.rows().into_iter().enumerate() {
                let cand = (sq_dist(q, p), j);
                if best.len() == k && closer(cand, best[k - 1]) != Ordering::Less {
                    continue;
                }
                let pos = best
                    .iter()
                    .position(|&b| closer(cand, b) == Ordering::Less)
                    .unwrap_or(best.len());
                best.insert(pos, cand);
                best.truncate(k);
            }
            best.into_iter().map(|(_, j)| j).collect()
        })
        .collect();
    Ok(out)
}

/// Votes for each source row from its neighbours: the single neighbour's vote
/// for `k = 1`, otherwise the majority with ties going to `+1`.
pub fn borrow_votes(neighbors: &[Vec<usize>], dst_votes: ArrayView1<'_, i8>) -> Vec<i8> {
    neighbors
        .iter()
        .map(|nb| {
            let s: i64 = nb.iter().map(|&j| i64::from(dst_votes[j])).sum();
            if s >= 0 {
                1
            } else {
                -1
            }
        })
        .collect()
}

/// For each source row, copies (k = 1) or majority-votes (k > 1) the labels of
/// its nearest destination rows, for every label column of `dst_labels`.
pub fn knn_borrow<T: Scalar>(
    mapped_src: ArrayView2<'_, T>,
    dst: ArrayView2<'_, T>,
    dst_labels: ArrayView2<'_, i8>,
    k: usize,
) -> Result<Array2<i8>> {
    if dst_labels.nrows() != dst.nrows() {
        return Err(Error::DimensionMismatch {
            context: "destination label rows",
            expected: dst.nrows(),
            found: dst_labels.nrows(),
        });
    }
    let nb = nearest_neighbors(mapped_src, dst, k)?;
    let mut out = Array2::<i8>::zeros((mapped_src.nrows(), dst_labels.ncols()));
    for (c, col) in dst_labels.columns().into_iter().enumerate() {
        let votes = borrow_votes(&nb, col);
        out.column_mut(c).assign(&ndarray::Array1::from(votes));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn identical_points_copy_labels() {
        let x = array![[0.0, 0.0], [1.0, 0.0], [5.0, 5.0]];
        let labels = array![[1i8, -1], [-1, -1], [1, 1]];
        let out = knn_borrow(x.view(), x.view(), labels.view(), 1).unwrap();
        assert_eq!(out, labels);
    }

    #[test]
    fn single_destination_is_borrowed_by_all() {
        let src = array![[0.0], [10.0], [-3.0]];
        let dst = array![[1.0]];
        let out = knn_borrow(src.view(), dst.view(), array![[-1i8]].view(), 1).unwrap();
        assert_eq!(out.column(0).to_vec(), vec![-1, -1, -1]);
    }

    #[test]
    fn equidistant_tie_goes_to_lower_index() {
        let src = array![[0.0, 0.0]];
        let dst = array![[1.0, 0.0], [-1.0, 0.0]];
        let out = knn_borrow(src.view(), dst.view(), array![[1i8], [-1]].view(), 1).unwrap();
        assert_eq!(out[[0, 0]], 1);
        let dst_rev = array![[-1.0, 0.0], [1.0, 0.0]];
        let out = knn_borrow(src.view(), dst_rev.view(), array![[1i8], [-1]].view(), 1).unwrap();
        assert_eq!(out[[0, 0]], 1);
        let nb = nearest_neighbors(src.view(), dst.view(), 2).unwrap();
        assert_eq!(nb[0], vec![0, 1]);
    }

    #[test]
    fn k_majority_with_tie_to_positive() {
        let src = array![[0.0]];
        let dst = array![[0.1], [0.2], [0.3], [9.0]];
        let labels = array![[-1i8], [-1], [1], [1]];
        assert_eq!(knn_borrow(src.view(), dst.view(), labels.view(), 3).unwrap()[[0, 0]], -1);
        let labels = array![[-1i8], [1], [1], [1]];
        assert_eq!(knn_borrow(src.view(), dst.view(), labels.view(), 2).unwrap()[[0, 0]], 1);
    }

    #[test]
    fn errors() {
        let src = array![[0.0]];
        let empty = Array2::<f64>::zeros((0, 1));
        assert!(matches!(
            nearest_neighbors(src.view(), empty.view(), 1),
            Err(Error::EmptyDestination)
        ));
        assert!(nearest_neighbors(src.view(), src.view(), 0).is_err());
        assert!(nearest_neighbors(src.view(), src.view(), 2).is_err());
    }
}
