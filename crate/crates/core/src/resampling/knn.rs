//! Brute-force Euclidean nearest neighbours with deterministic tie-breaking.

use ndarray::{ArrayView1, ArrayView2};
use rayon::prelude::*;

use crate::error::{Error, Result};

#[inline]
pub fn squared_distance(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn euclidean(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    squared_distance(a, b).sqrt()
}

/// Indices of the `k` smallest entries of `dists` (skipping `skip`), ordered
/// by distance then index.
fn k_smallest(dists: &[f64], k: usize, skip: Option<usize>) -> Vec<usize> {
    let mut cand: Vec<(f64, usize)> = dists
        .iter()
        .copied()
        .enumerate()
        .filter(|(j, _)| Some(*j) != skip)
        .map(|(j, d)| (d, j))
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < cand.len() {
        cand.select_nth_unstable_by(k, cmp);
        cand.truncate(k);
    }
    cand.sort_unstable_by(cmp);
    cand.into_iter().map(|(_, j)| j).collect()
}

/// For each row, its `k` nearest rows in the same matrix. With
/// `exclude_self` the row itself is never returned. Ties go to the lower index.
pub fn knn_same_set(
    points: ArrayView2<'_, f64>,
    k: usize,
    exclude_self: bool,
) -> Result<Vec<Vec<usize>>> {
    let n = points.nrows();
    if k == 0 || k >= n {
        return Err(Error::InvalidArgument(format!(
            "k = {k} neighbours requested from {n} rows"
        )));
    }
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let row = points.row(i);
            let dists: Vec<f64> = points
                .rows()
                .into_iter()
                .map(|r| squared_distance(row, r))
                .collect();
            k_smallest(&dists, k, exclude_self.then_some(i))
        })
        .collect())
}

/// For each query row, the `k` nearest reference rows at strictly positive
/// distance when `skip_coincident` is set. Lists may be shorter than `k` if
/// too few references qualify.
pub fn knn_cross(
    queries: ArrayView2<'_, f64>,
    refs: ArrayView2<'_, f64>,
    k: usize,
    skip_coincident: bool,
) -> Result<Vec<Vec<usize>>> {
    if k == 0 || refs.nrows() == 0 {
        return Err(Error::InvalidArgument(format!(
            "k = {k} neighbours requested from {} reference rows",
            refs.nrows()
        )));
    }
    if queries.ncols() != refs.ncols() {
        return Err(Error::DimensionMismatch {
            expected: refs.ncols(),
            got: queries.ncols(),
        });
    }
    Ok((0..queries.nrows())
        .into_par_iter()
        .map(|i| {
            let q = queries.row(i);
            let dists: Vec<f64> = refs
                .rows()
                .into_iter()
                .map(|r| {
                    let d = squared_distance(q, r);
                    if skip_coincident && d == 0.0 {
                        f64::INFINITY
                    } else {
                        d
                    }
                })
                .collect();
            let mut nb = k_smallest(&dists, k.min(refs.nrows()), None);
            nb.retain(|&j| dists[j].is_finite());
            nb
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::Rng;

    #[test]
    fn collinear_points() {
        let p = array![[0.0], [1.0], [3.0]];
        assert_eq!(
            knn_same_set(p.view(), 1, true).unwrap(),
            vec![vec![1], vec![0], vec![1]]
        );
    }

    #[test]
    fn duplicates_are_each_others_neighbour() {
        let p = array![[2.0, 2.0], [2.0, 2.0], [9.0, 9.0]];
        let nb = knn_same_set(p.view(), 1, true).unwrap();
        assert_eq!(nb[0], vec![1]);
        assert_eq!(nb[1], vec![0]);
        // self included: zero-distance tie resolved by index
        let nb = knn_same_set(p.view(), 2, false).unwrap();
        assert_eq!(nb[1], vec![0, 1]);
    }

    #[test]
    fn k_too_large() {
        let p = array![[0.0], [1.0]];
        assert!(knn_same_set(p.view(), 2, true).is_err());
        assert!(knn_same_set(p.view(), 0, true).is_err());
    }

    #[test]
    fn matches_exhaustive_oracle() {
        let mut rng = crate::rng::seeded(3);
        let p = Array2::from_shape_fn((50, 4), |_| rng.random::<f64>());
        let got = knn_same_set(p.view(), 5, true).unwrap();
        for i in 0..50 {
            let mut all: Vec<(f64, usize)> = Vec::new();
            for j in 0..50 {
                if j != i {
                    let mut s = 0.0;
                    for c in 0..4 {
                        s += (p[[i, c]] - p[[j, c]]).powi(2);
                    }
                    all.push((s.sqrt(), j));
                }
            }
            all.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let want: Vec<usize> = all[..5].iter().map(|x| x.1).collect();
            assert_eq!(got[i], want, "row {i}");
        }
    }

    #[test]
    fn cross_skips_coincident_rows() {
        let q = array![[0.0, 0.0]];
        let r = array![[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]];
        assert_eq!(knn_cross(q.view(), r.view(), 2, true).unwrap()[0], vec![1, 2]);
        assert_eq!(knn_cross(q.view(), r.view(), 2, false).unwrap()[0], vec![0, 1]);
        assert_eq!(knn_cross(q.view(), r.view(), 9, true).unwrap()[0], vec![1, 2]);
    }
}
